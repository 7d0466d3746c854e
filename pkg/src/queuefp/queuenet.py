"""Parallel work-conserving FIFO M/M/1 queues shared with interference.

Each queue serves the merged (main + interfering) arrival stream in FIFO
order with i.i.d. Exponential(mu) service times via the Lindley recursion
d_k = max(d_{k-1}, a_k) + s_k, which is the exact event-driven dynamics of
a work-conserving single server. Packets in the system at the horizon are
drained; their departures are retained and flagged.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import QueueSpec
from .seeding import derive_seed, rng_for
from .traffic import MergedTrace, PacketTrace, gen_poisson_trace, merge_traces

_INTERFERENCE_ID = -1


@dataclass(frozen=True)
class QueueOutput:
    main_departures: PacketTrace
    all_departures: MergedTrace
    per_packet_delay: np.ndarray
    horizon: float

    @property
    def drained_after_horizon(self) -> int:
        """Main-flow departures that happened past the observation window."""
        return int(np.sum(self.main_departures.times > self.horizon))


def fifo_departures(arrivals: np.ndarray, services: np.ndarray) -> np.ndarray:
    """Lindley recursion, vectorized: d = S + cummax(a - S + s), S = cumsum(s)."""
    if arrivals.size != services.size:
        raise ValueError("one service time per arrival required")
    S = np.cumsum(services)
    return S + np.maximum.accumulate(arrivals - S + services)


def simulate_queue(
    main: PacketTrace,
    spec: QueueSpec,
    seed: int,
    horizon: float,
    service_times: np.ndarray | None = None,
) -> QueueOutput:
    """One shared FIFO queue; interference drawn Poisson(lambda') on [0, horizon).

    ``service_times`` overrides the Exponential(mu) draws (testing hook);
    otherwise one service is drawn per initiation, in service order.
    """
    if spec.effective_rate <= 0:
        raise ValueError("unstable queue: interference alone saturates the server")
    interference = gen_poisson_trace(
        spec.interference_rate,
        horizon,
        derive_seed(seed, "interference"),
        flow_id=_INTERFERENCE_ID,
    )
    merged = merge_traces([main, interference])
    if service_times is None:
        rng = rng_for(seed, "service")
        services = rng.exponential(1.0 / spec.mu, size=len(merged))
    else:
        services = np.asarray(service_times, dtype=np.float64)
    departures = fifo_departures(merged.times, services)
    is_main = merged.flow_ids != _INTERFERENCE_ID
    main_dep = departures[is_main]
    main_arr = merged.times[is_main]
    return QueueOutput(
        main_departures=PacketTrace(
            main_dep, flow_id=main.flow_id, link="output", horizon=horizon
        ),
        all_departures=MergedTrace(departures, merged.flow_ids),
        per_packet_delay=main_dep - main_arr,
        horizon=horizon,
    )


def simulate_network(
    flows: list[PacketTrace],
    specs: list[QueueSpec],
    master_seed: int,
    horizon: float,
) -> list[QueueOutput]:
    """Independent parallel queues, one per flow, seeds derived by index."""
    if len(flows) != len(specs):
        raise ValueError("need one queue spec per flow")
    return [
        simulate_queue(flow, spec, derive_seed(master_seed, "queue", i), horizon)
        for i, (flow, spec) in enumerate(zip(flows, specs))
    ]


def dump_event_log(
    main: PacketTrace, output: QueueOutput, path: str | Path
) -> None:
    """CSV event log (event_type, time, flow_id) for debugging."""
    rows = []
    arr = merge_traces([main])
    for t, f in zip(arr.times, arr.flow_ids):
        rows.append(("arrival", float(t), int(f)))
    for t, f in zip(output.all_departures.times, output.all_departures.flow_ids):
        rows.append(("departure", float(t), int(f)))
    rows.sort(key=lambda r: r[1])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_type", "time", "flow_id"])
        writer.writerows(rows)
