"""Shared reference configurations for the test suites."""
from __future__ import annotations

import pytest

from queuefp import numerics
from queuefp.numerics import DeskScale, PlannerInputs, QueueSpec, Scenario, ScenarioPlan

REFERENCE_SPECS = (QueueSpec(mu=5.0, interference_rate=1.0),)


@pytest.fixture(scope="session")
def s1_plan() -> ScenarioPlan:
    """Scenario-1 reference: lam=1, m=8, mu=5, lam'=1, eps=0.2, zeta=0.1."""
    T = numerics.horizon_for_flow_count(0.2, 0.1, 1.0, REFERENCE_SPECS, 8)
    return numerics.plan_scenario1(
        PlannerInputs(T=T, epsilon=0.2, zeta=0.1, lam=1.0, queue_specs=REFERENCE_SPECS)
    )


@pytest.fixture(scope="session")
def s2_plan() -> ScenarioPlan:
    """Scenario-2 reference, desk-capped: m=64, p=0.05, eps=0.3, zeta=0.1."""
    return numerics.plan_scenario2(
        PlannerInputs(T=4000.0, epsilon=0.3, zeta=0.1, lam=1.0, queue_specs=REFERENCE_SPECS),
        desk=DeskScale(m_cap=64, p=0.05),
    )


@pytest.fixture(scope="session")
def decode_plan() -> ScenarioPlan:
    """Decode reference: M=16 codewords, 8 flows, ln(M)/T2 at half capacity."""
    C = numerics.capacity(1.0, REFERENCE_SPECS)
    plan = ScenarioPlan(
        scenario=Scenario.ALL_FLOWS,
        C=C,
        alpha=numerics.reliability_alpha(0.1),
        m=8,
        M=16,
        p=1.0,
        T=88.0,
        T1=80.0,
        T2=8.0,
        delta=0.3,
        lam=1.0,
    )
    assert plan.T1 + plan.T2 == plan.T
    return plan
