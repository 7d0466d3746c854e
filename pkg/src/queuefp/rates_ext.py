"""Distinct flow rates: per-flow slow-downs, codeword scaling, and C'.

The shared codebook is generated at the slowest rate lambda_min; faster
flows get time-compressed codewords (see codebook.scale_codeword) and a
per-flow slow-down delta_i. The common rate constraint becomes
ln(M) / T2 <= C' with C' = lambda_min * min_i ln((mu_i - lambda'_i) / lambda_i),
which collapses to the equal-rate capacity when all rates coincide.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .numerics import (
    DeskScale,
    InfeasibleScenarioError,
    PlannerInputs,
    QueueSpec,
    Scenario,
    ScenarioPlan,
    plan_scenario1,
    plan_scenario2,
)


@dataclass(frozen=True)
class RatePlan:
    lambdas: tuple[float, ...]
    lambda_min: float
    delta_i: tuple[float, ...]
    C_prime: float

    def __post_init__(self) -> None:
        for lam, d in zip(self.lambdas, self.delta_i):
            if not 0 < d < lam:
                raise InfeasibleScenarioError("per-flow slow-down must satisfy 0 < delta_i < lambda_i")


def distinct_capacity(lambdas: list[float] | tuple[float, ...], queue_specs: list[QueueSpec]) -> float:
    """C' = lambda_min * min_i ln((mu_i - lambda'_i) / lambda_i), nats/s."""
    if len(lambdas) != len(queue_specs):
        raise ValueError("need one queue spec per flow rate")
    lambda_min = min(lambdas)
    per_packet = []
    for lam, q in zip(lambdas, queue_specs):
        if lam >= q.effective_rate:
            raise InfeasibleScenarioError(
                f"flow rate {lam} >= effective service rate {q.effective_rate}"
            )
        per_packet.append(math.log(q.effective_rate / lam))
    return lambda_min * min(per_packet)


def plan_distinct_rates(
    lambdas: list[float] | tuple[float, ...],
    queue_specs: list[QueueSpec],
    scenario: Scenario,
    epsilon: float,
    zeta: float,
    T: float,
    desk: DeskScale | None = None,
) -> tuple[RatePlan, ScenarioPlan]:
    """Plan the base scenario at rate lambda_min with C replaced by C'.

    The phase split does not depend on the flow rate, so the base plan is
    computed at lambda_min against a surrogate queue whose effective rate
    reproduces C'; per-flow deltas then follow the equal-rate formulas with
    lambda_i substituted.
    """
    lambdas = tuple(float(x) for x in lambdas)
    for lam, q in zip(lambdas, queue_specs):
        if lam + q.interference_rate > q.mu:
            raise InfeasibleScenarioError(
                f"unstable queue: {lam} + {q.interference_rate} > {q.mu}"
            )
    lambda_min = min(lambdas)
    C_prime = distinct_capacity(lambdas, queue_specs)
    # Stability already checked flow-by-flow; the base planner only needs a
    # stable placeholder queue because C' is passed explicitly.
    widest = max(q.mu for q in queue_specs)
    inputs = PlannerInputs(
        T=T, epsilon=epsilon, zeta=zeta, lam=lambda_min,
        queue_specs=(QueueSpec(mu=widest),),
    )
    if scenario is Scenario.ALL_FLOWS:
        base = plan_scenario1(inputs, C_override=C_prime)
    else:
        base = plan_scenario2(inputs, desk=desk, C_override=C_prime)

    if scenario is Scenario.ALL_FLOWS:
        deltas = tuple(
            epsilon * math.sqrt(2.0 * lam / (base.m * base.T1)) for lam in lambdas
        )
    else:
        L = math.log1p(epsilon**2 / (2.0 * base.m * base.p * base.p))
        deltas = tuple(math.sqrt(lam / base.T1 * L) for lam in lambdas)
    rate_plan = RatePlan(
        lambdas=lambdas, lambda_min=lambda_min, delta_i=deltas, C_prime=C_prime
    )
    return rate_plan, base


def flow_plan(rate_plan: RatePlan, base: ScenarioPlan, flow_index: int) -> ScenarioPlan:
    """The base plan re-expressed for one flow (its rate and slow-down)."""
    return dataclasses.replace(
        base,
        lam=rate_plan.lambdas[flow_index],
        delta=rate_plan.delta_i[flow_index],
    )
