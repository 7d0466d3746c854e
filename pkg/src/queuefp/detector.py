"""Willie: optimal hypothesis tests on phase-1 packet counts.

Phase-1 counts are a sufficient statistic under both hypotheses (each is a
product of Poisson count laws over [0, T1)), so the likelihood-ratio tests
here operate on per-flow counts. Phase-2 observations carry no count
signature by construction; their distribution is checked separately.
Willie is assumed to know T1, delta, m and p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats
from scipy.special import gammaln


class Hypothesis(str, Enum):
    H0 = "H0"
    H1 = "H1"


@dataclass(frozen=True)
class DetectorVerdict:
    decision: Hypothesis
    statistic: float
    threshold: float = 0.0


def poisson_logpmf(n: np.ndarray | int, mean: float) -> np.ndarray | float:
    """log P(N = n) for N ~ Poisson(mean), via log-gamma (no overflow)."""
    n = np.asarray(n, dtype=np.float64)
    return n * math.log(mean) - mean - gammaln(n + 1.0)


def lrt_scenario1(
    counts: np.ndarray, lam: float, delta: float, T1: float
) -> DetectorVerdict:
    """All-flows LRT: every flow slowed to lam - delta under H1.

    Statistic is the summed log-likelihood ratio of Poisson count masses;
    threshold 0 (equal priors), ties decided H0.
    """
    counts = np.asarray(counts)
    stat = float(
        np.sum(poisson_logpmf(counts, (lam - delta) * T1) - poisson_logpmf(counts, lam * T1))
    )
    decision = Hypothesis.H1 if stat > 0.0 else Hypothesis.H0
    return DetectorVerdict(decision=decision, statistic=stat)


def scenario2_statistic(
    counts: np.ndarray, lam: float, delta: float, T1: float, p: float
) -> float:
    """Sum of ln(p * P_{lam-delta}(n) / P_lam(n) + (1 - p))."""
    counts = np.asarray(counts)
    if p == 0.0:
        return 0.0
    log_ratio = np.asarray(
        poisson_logpmf(counts, (lam - delta) * T1) - poisson_logpmf(counts, lam * T1)
    )
    if p == 1.0:
        return float(np.sum(log_ratio))
    return float(np.sum(np.logaddexp(math.log(p) + log_ratio, math.log1p(-p))))


def lrt_scenario2(
    counts: np.ndarray, lam: float, delta: float, T1: float, p: float
) -> DetectorVerdict:
    """Mixture LRT: each flow slowed with probability p under H1."""
    stat = scenario2_statistic(counts, lam, delta, T1, p)
    decision = Hypothesis.H1 if stat > 0.0 else Hypothesis.H0
    return DetectorVerdict(decision=decision, statistic=stat)


def pinsker_bound(kl: float) -> float:
    """Error lower bound max(0, 1/2 - sqrt(kl / 8)) from the KL divergence."""
    if kl < 0:
        raise ValueError("KL divergence must be nonnegative")
    return max(0.0, 0.5 - math.sqrt(kl / 8.0))


@dataclass(frozen=True)
class DistributionReport:
    """Goodness-of-fit report for a phase-2 trace segment."""

    n: int
    sufficient: bool
    ks_exponential_pvalue: float | None
    ks_uniform_pvalue: float | None
    count_pvalue: float | None
    note: str = ""


def phase2_distribution_check(
    times: np.ndarray, lam: float, T1: float, T: float, min_packets: int = 2
) -> DistributionReport:
    """Does a [T1, T] trace segment look like a Poisson(lam) burst?

    Reports a KS test of inter-packet gaps against Exponential(lam), a KS
    test of the points against Uniform(T1, T) (exact under the Poisson null,
    by the conditional-uniform property), and a two-sided Poisson tail
    p-value for the packet count.
    """
    times = np.asarray(times, dtype=np.float64)
    seg = times[(times >= T1) & (times <= T)]
    n = int(seg.size)
    mean_count = lam * (T - T1)
    if n < min_packets:
        return DistributionReport(
            n=n,
            sufficient=False,
            ks_exponential_pvalue=None,
            ks_uniform_pvalue=None,
            count_pvalue=_poisson_two_sided(n, mean_count),
            note="insufficient data",
        )
    gaps = np.diff(seg, prepend=T1)
    ks_exp = stats.kstest(gaps, "expon", args=(0.0, 1.0 / lam))
    unif = (seg - T1) / (T - T1)
    ks_unif = stats.kstest(unif, "uniform")
    return DistributionReport(
        n=n,
        sufficient=True,
        ks_exponential_pvalue=float(ks_exp.pvalue),
        ks_uniform_pvalue=float(ks_unif.pvalue),
        count_pvalue=_poisson_two_sided(n, mean_count),
    )


def _poisson_two_sided(n: int, mean: float) -> float:
    """Two-sided tail p-value of a Poisson(mean) count, capped at 1."""
    lower = stats.poisson.cdf(n, mean)
    upper = stats.poisson.sf(n - 1, mean)
    return float(min(1.0, 2.0 * min(lower, upper)))


def pooled_counts_chi2(counts: np.ndarray, mean: float, min_expected: float = 5.0) -> float:
    """Chi-squared goodness-of-fit p-value of counts against Poisson(mean)."""
    counts = np.asarray(counts, dtype=np.int64)
    lo = int(stats.poisson.ppf(1e-6, mean))
    hi = int(stats.poisson.ppf(1 - 1e-6, mean))
    edges = list(range(lo, hi + 2))
    expected = np.array(
        [stats.poisson.cdf(b - 1, mean) - stats.poisson.cdf(a - 1, mean)
         for a, b in zip(edges[:-1], edges[1:])]
    )
    observed = np.array([np.sum((counts >= a) & (counts < b))
                         for a, b in zip(edges[:-1], edges[1:])], dtype=np.float64)
    # Fold sparse tails into their neighbors so expected cells stay meaningful.
    exp_n = expected * counts.size
    keep_obs, keep_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, exp_n):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            keep_obs.append(acc_o)
            keep_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and keep_exp:
        keep_obs[-1] += acc_o
        keep_exp[-1] += acc_e
    obs = np.array(keep_obs)
    exp = np.array(keep_exp)
    # Renormalize the tiny probability mass outside the binned range.
    exp *= obs.sum() / exp.sum()
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 1
    return float(stats.chi2.sf(chi2, dof))
