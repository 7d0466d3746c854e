"""Two-phase embedding: causality, conservation, exactness, failure events."""
from __future__ import annotations

import numpy as np
import pytest

from queuefp import numerics
from queuefp.codebook import Codeword, generate_codebook
from queuefp.embedder import (
    Assignment,
    EmbedResult,
    ExcessMode,
    FailureKind,
    assign_fingerprints,
    embed,
    phase1_release_times,
    select_flows,
)
from queuefp.harness import reliability_experiment
from queuefp.numerics import PlannerInputs, QueueSpec
from queuefp.traffic import PacketTrace, gen_poisson_trace

SPECS = (QueueSpec(mu=5.0, interference_rate=1.0),)


def _mini_plan():
    """Small feasible scenario-1 plan for packet-level assertions."""
    T = numerics.horizon_for_flow_count(0.2, 0.1, 1.0, SPECS, 2)
    return numerics.plan_scenario1(
        PlannerInputs(T=T, epsilon=0.2, zeta=0.1, lam=1.0, queue_specs=SPECS)
    )


def test_phase1_release_is_time_scaling():
    arrivals = np.array([1.0, 2.0, 5.0, 80.0])
    out = phase1_release_times(arrivals, lam=1.0, delta=0.2, T1=10.0)
    # Release at a_k * lam/(lam-delta) = a_k * 1.25, kept below T1.
    assert np.allclose(out, [1.25, 2.5, 6.25])


def test_passthrough_when_unfingerprinted():
    plan = _mini_plan()
    trace = gen_poisson_trace(1.0, plan.T, seed=1)
    res = embed(trace, plan, None)
    assert not res.failed
    assert res.output_trace is trace
    assert res.fingerprint_id is None


def test_phase2_exactness_and_causality():
    plan = _mini_plan()
    for seed in range(30):
        trace = gen_poisson_trace(1.0, plan.T, seed=seed)
        cb = generate_codebook(1, plan.lam, plan.T2, seed=1000 + seed)
        res = embed(trace, plan, cb[0], fingerprint_id=0)
        if res.failed:
            continue
        out = res.output_trace.times
        phase2 = out[out >= plan.T1]
        expected = plan.T1 + cb[0].release_offsets()
        assert np.array_equal(phase2, expected)  # bit-exact release epochs
        # Causality: k-th release never precedes the k-th arrival (FIFO).
        assert np.all(out >= trace.times[: out.size])


def test_packet_conservation():
    plan = _mini_plan()
    trace = gen_poisson_trace(1.0, plan.T, seed=77)
    cb = generate_codebook(1, plan.lam, plan.T2, seed=78)
    res = embed(trace, plan, cb[0])
    assert res.arrived == len(trace)
    assert res.released <= res.arrived
    # released + still-buffered = arrived, buffered count is the difference.
    assert res.arrived - res.released >= 0


def test_fifo_order_strictly_increasing():
    plan = _mini_plan()
    for seed in range(10):
        trace = gen_poisson_trace(1.0, plan.T, seed=seed)
        cb = generate_codebook(1, plan.lam, plan.T2, seed=seed + 50)
        res = embed(trace, plan, cb[0])
        assert np.all(np.diff(res.output_trace.times) > 0)


def test_empty_input_underruns():
    plan = _mini_plan()
    trace = PacketTrace(np.empty(0), horizon=plan.T)
    cw = Codeword(delays=np.array([1.0, 1.0]), rate=1.0, horizon=plan.T2)
    res = embed(trace, plan, cw)
    assert res.failed
    assert res.failure_kind is FailureKind.BUFFER_UNDERRUN


def test_underrun_when_arrival_after_epoch():
    plan = _mini_plan()
    # One arrival far after T1: the first phase-2 epoch has no buffered packet.
    trace = PacketTrace(np.array([plan.T1 + plan.T2 * 0.9]), horizon=plan.T)
    cw = Codeword(delays=np.array([0.01]), rate=1.0, horizon=plan.T2)
    res = embed(trace, plan, cw)
    assert res.failed and res.failure_kind is FailureKind.BUFFER_UNDERRUN


def test_underrun_probability_at_zeta(s1_plan):
    # Planner at zeta=0.05: empirical P(underrun) <= 0.05 + 3 sigma.
    T = numerics.horizon_for_flow_count(0.2, 0.05, 1.0, SPECS, 2)
    plan = numerics.plan_scenario1(
        PlannerInputs(T=T, epsilon=0.2, zeta=0.05, lam=1.0, queue_specs=SPECS)
    )
    trials = 10000
    out = reliability_experiment(plan, trials, master_seed=424242)
    sigma = np.sqrt(0.05 * 0.95 / trials)
    assert out["pf_underrun"] <= 0.05 + 3.0 * sigma


def test_embed_result_flag_consistency():
    trace = PacketTrace(np.array([1.0]))
    with pytest.raises(ValueError):
        EmbedResult(
            output_trace=trace, fingerprint_id=0, failed=True,
            failure_kind=FailureKind.NONE, buffer_peak=0, released=1, arrived=1,
        )


def test_buffer_peak_positive_when_slowed():
    plan = _mini_plan()
    trace = gen_poisson_trace(1.0, plan.T, seed=5)
    cb = generate_codebook(1, plan.lam, plan.T2, seed=6)
    res = embed(trace, plan, cb[0])
    # Slowing the flow must accumulate a buffer by T1.
    assert res.buffer_peak >= 1


def test_excess_exponential_mode_releases_tail():
    plan = _mini_plan()
    # Short codeword ending early in phase 2 leaves excess arrivals.
    cw = Codeword(delays=np.array([0.5]), rate=1.0, horizon=plan.T2)
    trace = gen_poisson_trace(1.0, plan.T, seed=9)
    res = embed(trace, plan, cw, excess_mode=ExcessMode.EXPONENTIAL, excess_seed=3)
    buffered = embed(trace, plan, cw, excess_mode=ExcessMode.BUFFER)
    if not res.failed:
        assert res.released >= buffered.released
        assert np.all(res.output_trace.times < plan.T)


# ---------------------------------------------------------------------------
# Selection and assignment
# ---------------------------------------------------------------------------

def test_select_flows_edges():
    assert not select_flows(100, 0.0, seed=1).any()
    assert select_flows(100, 1.0, seed=1).all()
    with pytest.raises(ValueError):
        select_flows(10, 1.5, seed=1)


def test_select_flows_concentration():
    # m=1e6, p=1e-3: N_f within 3 sqrt(1000) of 1000 in >= 99% of seeds.
    hits = 0
    n_seeds = 200
    for s in range(n_seeds):
        n_f = int(select_flows(10**6, 1e-3, seed=s).sum())
        hits += abs(n_f - 1000) <= 3.0 * np.sqrt(1000.0)
    assert hits / n_seeds >= 0.99 - 3.0 * np.sqrt(0.01 * 0.99 / n_seeds)


def test_assignment_sequential_and_exhaustion():
    cb = generate_codebook(5, 1.0, 5.0, seed=11)
    a = assign_fingerprints(np.array([True, False, True, True]), cb)
    assert a.indices == (0, None, 1, 2)
    assert not a.exhausted and a.n_selected == 3
    b = assign_fingerprints(np.ones(6, dtype=bool), cb)
    assert b.exhausted
    assert b.indices == (0, 1, 2, 3, 4, None)


def test_exhaustion_probability_decreases_with_T():
    # Desk-capped scenario 2: P(exhausted) shrinks as T grows because M - m p
    # grows; check the Bernoulli tail directly via the planned margins.
    from scipy import stats

    probs = []
    for T in [2000.0, 4000.0, 8000.0]:
        plan = numerics.plan_scenario2(
            PlannerInputs(T=T, epsilon=0.3, zeta=0.1, lam=1.0, queue_specs=SPECS),
            desk=numerics.DeskScale(m_cap=64, M_cap=16, p=0.2 * (2000.0 / T)),
        )
        probs.append(float(stats.binom.sf(plan.M, plan.m, plan.p)))
    assert probs[0] > probs[1] > probs[2]
