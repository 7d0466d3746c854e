"""Bob: maximum-likelihood fingerprint extraction from output traces.

Decoding scores each codeword under an interference-free M/M/1 likelihood
with effective service rate mu_eff = mu - lambda': the hypothesized arrival
epochs are T1 + the codeword's cumulative delays, implied service times are
reconstructed through the FIFO recursion, and any nonpositive implied
service (or departure before arrival) makes the codeword infeasible with
log-score -inf.

Because the queue is FIFO, packets buffered at T1 (phase-1 stragglers)
depart before every codeword packet, so in the equal-rate scenarios the
codeword departures are exactly the trailing packets of Bob's post-T1 view;
the default alignment therefore matches codeword epochs against the last
n departures.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codebook import Codebook, Codeword
from .numerics import Scenario, ScenarioPlan

NEG_INF = float("-inf")


@dataclass(frozen=True)
class DecodeResult:
    per_flow: tuple[tuple[int, int | None, float], ...]
    permutation_correct: bool
    failures: int

    def to_json(self, path: str | Path | None = None) -> str:
        doc = {
            "per_flow": [
                {"flow": f, "codeword": c, "log_score": s} for f, c, s in self.per_flow
            ],
            "permutation_correct": self.permutation_correct,
            "failures": self.failures,
        }
        text = json.dumps(doc, indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text


def codeword_score(
    departures: np.ndarray,
    codeword: Codeword,
    T1: float,
    mu_eff: float,
    rate: float,
    align: str = "tail",
) -> float:
    """Log-likelihood of one codeword against the observed departures.

    ``align`` picks which observed packets are matched to the codeword
    epochs: "tail" (default; stragglers lead), "head", or "search" (best
    window, for flows that release excess packets after the codeword).
    Count mismatch costs mu_eff * |n_obs - n_cw| / rate.
    """
    epochs = T1 + codeword.release_offsets()
    n_obs, n_cw = departures.size, epochs.size
    n = min(n_obs, n_cw)
    if n == 0:
        return NEG_INF
    # Surplus packets are expected under "search" (stragglers lead, excess
    # releases trail and carry no fingerprint), so only a deficit is
    # penalized there; fixed alignments penalize any mismatch.
    if align == "search":
        penalty = mu_eff * max(n_cw - n_obs, 0) / rate
    else:
        penalty = mu_eff * abs(n_obs - n_cw) / rate
    if n_obs <= n_cw:
        windows = [(departures, epochs[:n])]
    elif align == "head":
        windows = [(departures[:n], epochs)]
    elif align == "tail":
        windows = [(departures[n_obs - n :], epochs)]
    elif align == "search":
        windows = [(departures[k : k + n], epochs) for k in range(n_obs - n + 1)]
    else:
        raise ValueError(f"unknown alignment {align!r}")
    best = NEG_INF
    for dd, aa in windows:
        if np.any(aa > dd):
            continue
        prev = np.empty_like(dd)
        prev[0] = NEG_INF
        prev[1:] = dd[:-1]
        services = dd - np.maximum(prev, aa)
        if np.any(services <= 0):
            continue
        score = n * math.log(mu_eff) - mu_eff * float(services.sum()) - penalty
        if score > best:
            best = score
    return best


def ml_decode(
    output: np.ndarray,
    codebook: Codebook,
    T1: float,
    mu_eff: float,
    align: str = "tail",
) -> tuple[int, float]:
    """Argmax codeword index and its log-score; ties go to the lowest index."""
    if mu_eff <= 0:
        raise ValueError("effective service rate must be positive")
    best_idx, best_score = 0, NEG_INF
    for idx, cw in enumerate(codebook.codewords):
        score = codeword_score(output, cw, T1, mu_eff, codebook.rate, align=align)
        if score > best_score:
            best_idx, best_score = idx, score
    return best_idx, best_score


def rescale_and_decode(
    output: np.ndarray,
    codebook: Codebook,
    T1: float,
    mu_eff: float,
    lambda_i: float,
    lambda_min: float,
    align: str = "search",
) -> tuple[int, float]:
    """Distinct-rates decode: stretch the post-T1 view back to the base rate.

    The embedder compressed the base codeword by lambda_min / lambda_i, so
    Bob expands relative timestamps by lambda_i / lambda_min and scores
    against the base-rate codebook with the correspondingly slowed
    effective service rate.
    """
    ratio = lambda_i / lambda_min
    rescaled = (output - T1) * ratio
    return ml_decode(rescaled, codebook, 0.0, mu_eff / ratio, align=align)


def decode_network(
    outputs: list,
    codebook: Codebook,
    plan: ScenarioPlan,
    assignment: tuple[int | None, ...],
    mu_effs: list[float],
    none_threshold: float | None = None,
    align: str = "tail",
) -> DecodeResult:
    """Per-flow ML decode plus input/output permutation recovery.

    In the probabilistic scenario a flow whose best score is -inf or falls
    below ``none_threshold`` is declared unfingerprinted.
    """
    per_flow: list[tuple[int, int | None, float]] = []
    failures = 0
    permutation_correct = True
    for i, out in enumerate(outputs):
        obs = out.main_departures.times
        obs = obs[obs >= plan.T1]
        idx, score = ml_decode(obs, codebook, plan.T1, mu_effs[i], align=align)
        decoded: int | None = idx
        if plan.scenario is Scenario.PROBABILISTIC:
            if score == NEG_INF or (none_threshold is not None and score < none_threshold):
                decoded = None
        per_flow.append((i, decoded, score))
        expected = assignment[i]
        if expected is not None:
            if decoded != expected:
                failures += 1
                permutation_correct = False
        elif decoded is not None:
            failures += 1
    return DecodeResult(
        per_flow=tuple(per_flow),
        permutation_correct=permutation_correct,
        failures=failures,
    )
