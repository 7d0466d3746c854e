"""Distinct flow rates: C', per-flow slow-downs, degeneracy, round trips."""
from __future__ import annotations

import math

import numpy as np
import pytest

from queuefp import numerics
from queuefp.codebook import generate_codebook, scale_codeword
from queuefp.decoder import NEG_INF, rescale_and_decode
from queuefp.embedder import ExcessMode, embed
from queuefp.numerics import (
    DeskScale,
    InfeasibleScenarioError,
    PlannerInputs,
    QueueSpec,
    Scenario,
)
from queuefp.queuenet import simulate_queue
from queuefp.rates_ext import (
    RatePlan,
    distinct_capacity,
    flow_plan,
    plan_distinct_rates,
)
from queuefp.traffic import gen_poisson_trace

SPECS = (QueueSpec(mu=5.0, interference_rate=1.0),)


def test_distinct_capacity_substitution_oracle():
    # lam = {1, 2}, effective rates {e, 2e}: per-flow ln(eff_i / lam_i) = 1
    # for both, so C' = lam_min * 1 = 1 nat/s.
    lambdas = [1.0, 2.0]
    specs = [QueueSpec(mu=math.e), QueueSpec(mu=2.0 * math.e)]
    assert distinct_capacity(lambdas, specs) == pytest.approx(1.0, rel=1e-12)


def test_distinct_capacity_min_over_flows():
    lambdas = [1.0, 2.0]
    specs = [QueueSpec(mu=5.0, interference_rate=1.0), QueueSpec(mu=5.0, interference_rate=1.0)]
    # Flow 2's per-packet bound ln(4/2) < flow 1's ln(4/1).
    assert distinct_capacity(lambdas, specs) == pytest.approx(math.log(2.0), rel=1e-12)


def test_distinct_capacity_infeasible():
    with pytest.raises(InfeasibleScenarioError):
        distinct_capacity([4.0], [QueueSpec(mu=5.0, interference_rate=1.0)])


def test_rate_plan_validation():
    with pytest.raises(InfeasibleScenarioError):
        RatePlan(lambdas=(1.0,), lambda_min=1.0, delta_i=(1.5,), C_prime=1.0)


def test_equal_rate_degeneracy_bit_identical_scenario1():
    T = numerics.horizon_for_flow_count(0.2, 0.1, 1.0, SPECS, 4)
    base_inputs = PlannerInputs(T=T, epsilon=0.2, zeta=0.1, lam=1.0, queue_specs=SPECS)
    equal = numerics.plan_scenario1(base_inputs)
    rate_plan, distinct = plan_distinct_rates(
        [1.0], list(SPECS), Scenario.ALL_FLOWS, 0.2, 0.1, T
    )
    assert rate_plan.C_prime == equal.C
    assert distinct.m == equal.m
    assert distinct.T1 == equal.T1 and distinct.T2 == equal.T2
    assert distinct.delta == equal.delta
    assert rate_plan.delta_i[0] == equal.delta


def test_equal_rate_degeneracy_bit_identical_scenario2():
    desk = DeskScale(m_cap=64, p=0.05)
    inputs = PlannerInputs(T=4000.0, epsilon=0.3, zeta=0.1, lam=1.0, queue_specs=SPECS)
    equal = numerics.plan_scenario2(inputs, desk=desk)
    rate_plan, distinct = plan_distinct_rates(
        [1.0], list(SPECS), Scenario.PROBABILISTIC, 0.3, 0.1, 4000.0, desk=desk
    )
    assert rate_plan.C_prime == equal.C
    assert (distinct.m, distinct.M, distinct.p) == (equal.m, equal.M, equal.p)
    assert distinct.T1 == equal.T1
    assert distinct.delta == equal.delta
    assert rate_plan.delta_i[0] == equal.delta


def test_per_flow_delta_formulas():
    lambdas = [1.0, 2.0, 4.0]
    specs = [QueueSpec(mu=5.0, interference_rate=1.0),
             QueueSpec(mu=10.0, interference_rate=1.0),
             QueueSpec(mu=20.0, interference_rate=1.0)]
    T = 3000.0
    rate_plan, base = plan_distinct_rates(lambdas, specs, Scenario.ALL_FLOWS, 0.2, 0.1, T)
    for lam_i, d_i in zip(lambdas, rate_plan.delta_i):
        assert d_i == pytest.approx(0.2 * math.sqrt(2.0 * lam_i / (base.m * base.T1)), rel=1e-12)
        assert 0 < d_i < lam_i
    fp = flow_plan(rate_plan, base, 2)
    assert fp.lam == 4.0 and fp.delta == rate_plan.delta_i[2]
    assert fp.T1 == base.T1  # phase split is shared


def test_fingerprint_duration_shrinks_with_rate():
    cb = generate_codebook(1, 1.0, 8.0, seed=1)
    for lam_i in [1.0, 2.0, 4.0]:
        scaled = scale_codeword(cb[0], lam_i, 1.0)
        assert scaled.delays.sum() <= 8.0 * (1.0 / lam_i) + 1e-12


def test_unstable_flow_rejected():
    with pytest.raises(InfeasibleScenarioError):
        plan_distinct_rates([4.5], [QueueSpec(mu=5.0, interference_rate=1.0)],
                            Scenario.ALL_FLOWS, 0.2, 0.1, 1000.0)


def test_scale_embed_rescale_decode_round_trip(decode_plan):
    # 500 trials: scale -> embed -> near-transparent queue -> rescale ->
    # decode recovers the assigned codeword every time.
    import dataclasses

    base = decode_plan  # base-rate plan at lam_min = 1
    lam_i, lam_min = 2.0, 1.0
    ratio = lam_i / lam_min
    flow_plan_i = dataclasses.replace(base, lam=lam_i, delta=base.delta * ratio)
    ok = 0
    total = 0
    for t in range(500):
        cb = generate_codebook(4, lam_min, base.T2, seed=7000 + t)
        true_idx = t % 4
        scaled = scale_codeword(cb[true_idx], lam_i, lam_min)
        flow = gen_poisson_trace(lam_i, base.T, seed=9000 + t)
        res = embed(flow, flow_plan_i, scaled,
                    excess_mode=ExcessMode.EXPONENTIAL, excess_seed=t)
        if res.failed:
            continue
        out = simulate_queue(res.output_trace, QueueSpec(mu=1e6), seed=t, horizon=base.T)
        obs = out.main_departures.times
        obs = obs[obs >= base.T1]
        idx, score = rescale_and_decode(obs, cb, base.T1, 1e6, lam_i, lam_min)
        total += 1
        ok += idx == true_idx and score > NEG_INF
    assert total >= 450
    assert ok == total
