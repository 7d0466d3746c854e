"""Hypothesis tests: LRT reductions, optimality, KL bound, phase-2 checks."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from queuefp.detector import (
    DistributionReport,
    Hypothesis,
    lrt_scenario1,
    lrt_scenario2,
    phase2_distribution_check,
    pinsker_bound,
    poisson_logpmf,
    pooled_counts_chi2,
    scenario2_statistic,
)
from queuefp.numerics import poisson_kl_bound


def test_poisson_logpmf_matches_scipy():
    ns = np.arange(0, 200)
    ours = poisson_logpmf(ns, 37.5)
    ref = stats.poisson.logpmf(ns, 37.5)
    assert np.allclose(ours, ref, rtol=1e-10)


def test_lrt1_zero_delta_is_h0():
    v = lrt_scenario1(np.array([3, 7, 100]), lam=1.0, delta=0.0, T1=10.0)
    assert v.statistic == 0.0
    assert v.decision is Hypothesis.H0  # ties go to H0


def test_lrt1_reduces_to_count_threshold():
    # For m=1 the LRT decides H1 iff n < T1 * delta / ln(lam/(lam-delta)).
    lam, delta, T1 = 1.0, 0.2, 100.0
    threshold = T1 * delta / math.log(lam / (lam - delta))
    rng = np.random.default_rng(1)
    for n in rng.integers(0, 501, size=10000):
        v = lrt_scenario1(np.array([n]), lam, delta, T1)
        want = Hypothesis.H1 if n < threshold else Hypothesis.H0
        assert v.decision is want


def test_lrt1_optimal_over_count_thresholds():
    # m=1, counts <= 50: no deterministic count-threshold rule beats the LRT
    # error (P_FA + P_MD)/2, computed exactly from the Poisson masses.
    lam, delta, T1 = 1.0, 0.5, 20.0
    null_mean, alt_mean = lam * T1, (lam - delta) * T1
    ns = np.arange(0, 51)
    p0 = stats.poisson.pmf(ns, null_mean)
    p1 = stats.poisson.pmf(ns, alt_mean)
    # LRT error, exact: decide H1 on the region where the LRT fires.
    fires = np.array(
        [lrt_scenario1(np.array([n]), lam, delta, T1).decision is Hypothesis.H1 for n in ns]
    )
    lrt_err = 0.5 * (p0[fires].sum() + p1[~fires].sum() + stats.poisson.sf(50, alt_mean))
    for k in range(0, 52):
        rule = ns < k  # decide H1 iff n < k
        err = 0.5 * (p0[rule].sum() + p1[~rule].sum() + stats.poisson.sf(50, alt_mean))
        assert lrt_err <= err + 1e-12


def test_lrt2_collapses_to_lrt1_at_p1():
    counts = np.array([17, 22, 19])
    a = lrt_scenario2(counts, 1.0, 0.2, 20.0, p=1.0)
    b = lrt_scenario1(counts, 1.0, 0.2, 20.0)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-12)
    assert a.decision is b.decision


def test_lrt2_p0_is_h0():
    v = lrt_scenario2(np.array([5, 10]), 1.0, 0.2, 20.0, p=0.0)
    assert v.statistic == 0.0 and v.decision is Hypothesis.H0


def test_mixture_statistic_monotone_in_counts():
    # Each per-flow term decreases as its count grows (delta > 0).
    lam, delta, T1, p = 1.0, 0.3, 50.0, 0.1
    stats_on_grid = [
        scenario2_statistic(np.array([n]), lam, delta, T1, p) for n in range(0, 120)
    ]
    assert all(a >= b for a, b in zip(stats_on_grid, stats_on_grid[1:]))


def test_pinsker_bound_values():
    assert pinsker_bound(0.0) == 0.5
    # kl = eps^2/2 with eps=0.2: 1/2 - sqrt(0.0025) = 0.45 = 1/2 - eps/2.
    assert pinsker_bound(0.2**2 / 2.0) == pytest.approx(0.45, rel=1e-12)
    assert pinsker_bound(2.0) == 0.0
    with pytest.raises(ValueError):
        pinsker_bound(-0.1)


def test_kl_bound_dominates_empirical_mixture_kl(s2_plan):
    # Estimate D(P1 || P0) from 1e6 mixture samples; the closed-form bound
    # must dominate within sampling error.
    plan = s2_plan
    rng = np.random.default_rng(99)
    n = 10**6
    sel = rng.random(n) < plan.p
    counts = np.where(
        sel,
        rng.poisson(plan.slowed_rate * plan.T1, size=n),
        rng.poisson(plan.lam * plan.T1, size=n),
    )
    # Per-flow log likelihood ratio of the mixture vs the null.
    lr = poisson_logpmf(counts, plan.slowed_rate * plan.T1) - poisson_logpmf(
        counts, plan.lam * plan.T1
    )
    terms = np.logaddexp(math.log(plan.p) + lr, math.log1p(-plan.p))
    kl_per_flow = float(terms.mean())
    sem = float(terms.std(ddof=1)) / math.sqrt(n)
    bound = poisson_kl_bound(plan.m, plan.p, plan.delta, plan.T1, plan.lam)
    assert plan.m * (kl_per_flow - 3.0 * sem) <= bound


def test_phase2_check_accepts_codeword_bursts():
    # Codewords are Poisson realizations, so KS p-values across trials are
    # ~Uniform(0,1); check via a KS test on the p-values themselves.
    from queuefp.codebook import generate_codebook

    T1, T2 = 0.0, 50.0
    pvals = []
    for t in range(500):
        cb = generate_codebook(1, 1.0, T2, seed=3000 + t)
        times = T1 + cb[0].release_offsets()
        rep = phase2_distribution_check(times, 1.0, T1, T1 + T2)
        if rep.sufficient:
            pvals.append(rep.ks_uniform_pvalue)
    res = stats.kstest(np.array(pvals), "uniform")
    assert res.pvalue > 0.001


def test_phase2_check_rejects_equal_spacing():
    times = np.linspace(10.0, 60.0, 51)
    rep = phase2_distribution_check(times, 1.0, 10.0, 60.0)
    assert rep.ks_exponential_pvalue < 0.01


def test_phase2_check_insufficient_data():
    rep = phase2_distribution_check(np.empty(0), 1.0, 10.0, 60.0)
    assert not rep.sufficient
    assert rep.note == "insufficient data"
    assert rep.ks_exponential_pvalue is None
    # The count p-value is still reported (0 packets vs mean 50: tiny).
    assert rep.count_pvalue < 0.01


def test_pooled_counts_chi2_accepts_and_rejects():
    rng = np.random.default_rng(4)
    good = rng.poisson(30.0, size=5000)
    assert pooled_counts_chi2(good, 30.0) > 0.01
    bad = rng.poisson(36.0, size=5000)
    assert pooled_counts_chi2(bad, 30.0) < 0.01
