"""Alice: two-phase buffer-and-release fingerprint embedding.

Phase 1 ([0, T1)) slows the flow from rate lambda to lambda - delta by
time-scaling: the k-th arrival is released at a_k * lambda / (lambda - delta),
so the released stream is exactly a Poisson(lambda - delta) realization and
the buffer at T1 holds the arrivals whose scaled release falls past T1.
Phase 2 ([T1, T]) releases buffered packets exactly at T1 + the codeword's
cumulative delays; running out of buffered packets at a prescribed epoch is
the buffer-underrun failure event.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .codebook import Codebook, Codeword
from .numerics import ScenarioPlan
from .seeding import rng_for
from .traffic import PacketTrace


class FailureKind(str, Enum):
    NONE = "none"
    BUFFER_UNDERRUN = "buffer_underrun"
    CODEBOOK_EXHAUSTED = "codebook_exhausted"


class ExcessMode(str, Enum):
    """What happens to phase-2 arrivals beyond the codeword length.

    BUFFER keeps them until T (equal-rate scenarios); EXPONENTIAL releases
    them with fresh Exponential(rate) inter-packet delays (distinct-rate
    extension).
    """

    BUFFER = "buffer"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class EmbedResult:
    output_trace: PacketTrace
    fingerprint_id: int | None
    failed: bool
    failure_kind: FailureKind
    buffer_peak: int
    released: int
    arrived: int

    def __post_init__(self) -> None:
        if self.failed != (self.failure_kind is not FailureKind.NONE):
            raise ValueError("failed flag must mirror failure_kind")


def phase1_release_times(arrivals: np.ndarray, lam: float, delta: float, T1: float) -> np.ndarray:
    """Release times of the slow-down phase: a_k * lam / (lam - delta), < T1."""
    scaled = arrivals * (lam / (lam - delta))
    return scaled[scaled < T1]


def embed(
    input_trace: PacketTrace,
    plan: ScenarioPlan,
    codeword: Codeword | None,
    fingerprint_id: int | None = None,
    excess_mode: ExcessMode = ExcessMode.BUFFER,
    excess_seed: int | None = None,
) -> EmbedResult:
    """Embed one codeword into one flow; ``codeword=None`` passes through."""
    arrivals = input_trace.times
    if codeword is None:
        # Scenario-2 unselected flow: untouched.
        return EmbedResult(
            output_trace=input_trace,
            fingerprint_id=None,
            failed=False,
            failure_kind=FailureKind.NONE,
            buffer_peak=0,
            released=len(arrivals),
            arrived=len(arrivals),
        )

    lam, delta, T1, T = plan.lam, plan.delta, plan.T1, plan.T
    offsets = codeword.release_offsets()
    if T1 + offsets[-1] > T:
        raise ValueError("codeword extends past the horizon (planner bug)")

    phase1 = phase1_release_times(arrivals, lam, delta, T1)
    k = phase1.size  # arrivals consumed by phase 1, in order

    epochs = T1 + offsets
    failed = False
    available = arrivals[k : k + epochs.size]
    if available.size < epochs.size:
        n_ok = available.size
        late = np.flatnonzero(available > epochs[: available.size])
        if late.size:
            n_ok = int(late[0])
        failed = True
    else:
        late = np.flatnonzero(available > epochs)
        n_ok = int(late[0]) if late.size else epochs.size
        failed = late.size > 0
    phase2 = epochs[:n_ok]
    released = np.concatenate([phase1, phase2])

    tail: np.ndarray = np.empty(0)
    if not failed and excess_mode is ExcessMode.EXPONENTIAL:
        tail = _release_excess(arrivals, released.size, float(epochs[-1]), T, lam, excess_seed)
        released = np.concatenate([released, tail])

    peak = _buffer_peak(arrivals, released)
    return EmbedResult(
        output_trace=PacketTrace(
            released,
            flow_id=input_trace.flow_id,
            link=input_trace.link,
            horizon=input_trace.horizon,
        ),
        fingerprint_id=fingerprint_id,
        failed=failed,
        failure_kind=FailureKind.BUFFER_UNDERRUN if failed else FailureKind.NONE,
        buffer_peak=peak,
        released=int(released.size),
        arrived=int(arrivals.size),
    )


def _release_excess(
    arrivals: np.ndarray,
    already_released: int,
    last_epoch: float,
    T: float,
    lam: float,
    seed: int | None,
) -> np.ndarray:
    """Excess phase-2 packets leave with fresh Exponential(lam) gaps until T."""
    rng = rng_for(seed if seed is not None else 0, "excess")
    out = []
    t = last_epoch
    k = already_released
    while k < arrivals.size:
        t = t + rng.exponential(1.0 / lam)
        if t >= T:
            break
        if arrivals[k] > t:
            # Not arrived yet; excess packets are released as they queue up.
            t = max(t, arrivals[k])
            if t >= T:
                break
        out.append(t)
        k += 1
    return np.asarray(out)


def _buffer_peak(arrivals: np.ndarray, releases: np.ndarray) -> int:
    """Max over time of (arrived so far) - (released so far)."""
    if arrivals.size == 0:
        return 0
    held = np.arange(1, arrivals.size + 1) - np.searchsorted(releases, arrivals, side="right")
    return int(max(held.max(initial=0), 0))


def select_flows(m: int, p: float, seed: int) -> np.ndarray:
    """I.i.d. Bernoulli(p) fingerprint selections X_1..X_m."""
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    if m < 0:
        raise ValueError("m must be nonnegative")
    rng = rng_for(seed, "select")
    return rng.random(m) < p


@dataclass(frozen=True)
class Assignment:
    """Codeword index per flow (None = unfingerprinted)."""

    indices: tuple[int | None, ...]
    exhausted: bool

    @property
    def n_selected(self) -> int:
        return sum(1 for i in self.indices if i is not None)


def assign_fingerprints(selected: np.ndarray, codebook: Codebook) -> Assignment:
    """Distinct codeword indices, handed out in selection order.

    More selected flows than codewords is the codebook-exhausted failure;
    the overflow flows are left unassigned.
    """
    indices: list[int | None] = []
    next_idx = 0
    exhausted = False
    for sel in selected:
        if not sel:
            indices.append(None)
        elif next_idx < codebook.M:
            indices.append(next_idx)
            next_idx += 1
        else:
            exhausted = True
            indices.append(None)
    return Assignment(indices=tuple(indices), exhausted=exhausted)
