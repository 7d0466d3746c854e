"""Poisson packet flows and timestamped traces."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import rng_for


@dataclass(frozen=True)
class PacketTrace:
    """Ordered packet timestamps for one flow on one link.

    Timestamps are strictly increasing and live in [0, horizon).
    """

    times: np.ndarray
    flow_id: int = 0
    link: str = "input"
    horizon: float | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.ndim != 1:
            raise ValueError("timestamps must be one-dimensional")
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if times.size and times[0] < 0:
            raise ValueError("timestamps must be nonnegative")

    def __len__(self) -> int:
        return int(self.times.size)

    def count_before(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="left"))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "flow_id"])
            for t in self.times:
                writer.writerow([repr(float(t)), self.flow_id])


@dataclass(frozen=True)
class MergedTrace:
    """Timestamp-sorted union of traces with per-packet origin tags."""

    times: np.ndarray
    flow_ids: np.ndarray

    def __len__(self) -> int:
        return int(self.times.size)


def gen_poisson_trace(
    rate: float,
    horizon: float,
    seed: int,
    flow_id: int = 0,
    link: str = "input",
) -> PacketTrace:
    """Poisson(rate) arrivals on the half-open interval [0, horizon).

    A packet landing exactly at the horizon is excluded, so phase windows
    never double count.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if rate == 0:
        return PacketTrace(np.empty(0), flow_id=flow_id, link=link, horizon=horizon)
    rng = rng_for(seed)
    n = int(rng.poisson(rate * horizon))
    times = np.sort(rng.uniform(0.0, horizon, size=n))
    times = times[times < horizon]
    times = _break_ties(times)
    return PacketTrace(times, flow_id=flow_id, link=link, horizon=horizon)


def _break_ties(times: np.ndarray) -> np.ndarray:
    """Nudge coincident timestamps apart by the smallest representable step."""
    if times.size < 2:
        return times
    while True:
        dup = np.flatnonzero(np.diff(times) <= 0)
        if dup.size == 0:
            return times
        times = times.copy()
        times[dup + 1] = np.nextafter(times[dup], np.inf)


def merge_traces(traces: list[PacketTrace]) -> MergedTrace:
    """Sorted union of traces; equal timestamps break toward lower flow_id."""
    if not traces:
        return MergedTrace(np.empty(0), np.empty(0, dtype=np.int64))
    times = np.concatenate([t.times for t in traces])
    ids = np.concatenate(
        [np.full(len(t), t.flow_id, dtype=np.int64) for t in traces]
    )
    order = np.lexsort((ids, times))
    return MergedTrace(times[order], ids[order])


def merged_to_csv(merged: MergedTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "flow_id"])
        for t, f in zip(merged.times, merged.flow_ids):
            writer.writerow([repr(float(t)), int(f)])
