"""Closed-form planner math for invisible flow fingerprinting.

Everything a scenario needs before any packet is simulated lives here: the
timing capacity of a shared exponential-server queue, the reliability
constant alpha, the buffering/fingerprinting phase split, the slow-down
delta, and the flow/codebook counts for both fingerprinting scenarios.
All logarithms are natural; capacities are in nats per second.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.special import erfinv


class InfeasibleScenarioError(ValueError):
    """The requested horizon/slack combination admits no valid plan."""


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def lambert_w(y: float) -> float:
    """Principal-branch Lambert W: the w >= 0 with w * exp(w) = y, y >= 0.

    Analytic initial guess (log-log for large arguments, first-order series
    near zero) followed by Halley refinement; converges to relative residual
    below 1e-15 in a handful of iterations on [0, 1e300].
    """
    if y < 0:
        raise ValueError(f"lambert_w requires y >= 0, got {y}")
    if y == 0.0:
        return 0.0
    if y > math.e:
        w = math.log(y)
        w -= math.log(w)
    else:
        # W(y) ~ y near zero; clamp keeps the iteration in-branch.
        w = y / (1.0 + y) if y < 1.0 else 1.0
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - y
        # Halley step.
        denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0)
        step = f / denom
        w -= step
        if abs(step) <= 1e-16 * (1.0 + abs(w)):
            break
    return w


def inverse_erf(x: float) -> float:
    """Inverse error function on (-1, 1)."""
    if not -1.0 < x < 1.0:
        raise ValueError(f"inverse_erf requires |x| < 1, got {x}")
    return float(erfinv(x))


def fact1_solve(y: float) -> float:
    """Solve x * ln(x) = y for x > 0 via x = y / W(y)."""
    if y <= 0:
        raise ValueError(f"fact1_solve requires y > 0, got {y}")
    return y / lambert_w(y)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueueSpec:
    """One queue: service rate mu and aggregate interference rate."""

    mu: float
    interference_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError(f"service rate must be positive, got {self.mu}")
        if self.interference_rate < 0:
            raise ValueError("interference rate must be nonnegative")

    @property
    def effective_rate(self) -> float:
        return self.mu - self.interference_rate


@dataclass(frozen=True)
class PlannerInputs:
    T: float
    epsilon: float
    zeta: float
    lam: float
    queue_specs: tuple[QueueSpec, ...]

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.zeta <= 1:
            raise ValueError("zeta must be in (0, 1]")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not self.queue_specs:
            raise ValueError("at least one queue spec required")
        object.__setattr__(self, "queue_specs", tuple(self.queue_specs))
        for q in self.queue_specs:
            if self.lam + q.interference_rate > q.mu:
                raise ValueError(
                    f"unstable queue: lambda={self.lam} + lambda'="
                    f"{q.interference_rate} exceeds mu={q.mu}"
                )


class Scenario(str, Enum):
    ALL_FLOWS = "all_flows"
    PROBABILISTIC = "probabilistic"


@dataclass(frozen=True)
class ScenarioPlan:
    """All derived parameters for one scenario instance.

    ``log_m_raw``/``log_M_raw``/``log_p_raw`` keep the pre-rounding
    (and pre-desk-cap) scenario-2 closed forms in log-space so identity
    checks survive magnitudes far beyond float range.
    """

    scenario: Scenario
    C: float
    alpha: float
    m: int
    M: int
    p: float
    T: float
    T1: float
    T2: float
    delta: float
    lam: float
    log_m_raw: float | None = None
    log_M_raw: float | None = None
    log_p_raw: float | None = None
    sqrt_cta: float | None = None

    def __post_init__(self) -> None:
        if not (self.T1 > 0 and self.T2 > 0):
            raise InfeasibleScenarioError("both phases must have positive length")
        if self.T1 + self.T2 != self.T:
            raise InfeasibleScenarioError("T1 + T2 must equal T exactly")
        if not 0 < self.delta < self.lam:
            raise InfeasibleScenarioError("slow-down must satisfy 0 < delta < lambda")

    @property
    def slowed_rate(self) -> float:
        return self.lam - self.delta

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "C": self.C,
            "alpha": self.alpha,
            "m": self.m,
            "M": self.M,
            "p": self.p,
            "T": self.T,
            "T1": self.T1,
            "T2": self.T2,
            "delta": self.delta,
            "lambda": self.lam,
            "log_m_raw": self.log_m_raw,
            "log_M_raw": self.log_M_raw,
            "log_p_raw": self.log_p_raw,
        }


@dataclass(frozen=True)
class DeskScale:
    """Caps that shrink scenario-2 counts to Monte-Carlo-friendly sizes.

    The raw closed forms grow like exp(2CT); the caps replace m and M (and
    optionally p) while the phase split and delta are re-derived from the
    capped values, so the KL budget identity still holds exactly.
    """

    m_cap: int
    M_cap: int | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if self.m_cap < 1:
            raise ValueError("m_cap must be >= 1")
        if self.M_cap is not None and self.M_cap < 1:
            raise ValueError("M_cap must be >= 1")
        if self.p is not None and not 0 <= self.p <= 1:
            raise ValueError("p must be in [0, 1]")


# ---------------------------------------------------------------------------
# Planner formulas
# ---------------------------------------------------------------------------

def capacity(lam: float, queue_specs: list[QueueSpec] | tuple[QueueSpec, ...]) -> float:
    """Timing capacity C = lambda * ln(min_i(mu_i - lambda'_i) / lambda), nats/s."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    worst = min(q.effective_rate for q in queue_specs)
    if worst <= lam:
        raise InfeasibleScenarioError(
            f"nonpositive capacity: min effective service rate {worst} <= lambda {lam}"
        )
    return lam * math.log(worst / lam)


def reliability_alpha(zeta: float) -> float:
    """alpha = (2 * erfinv(1 - zeta))^2."""
    if not 0 < zeta <= 1:
        raise ValueError("zeta must be in (0, 1]")
    if zeta == 1.0:
        return 0.0
    return (2.0 * inverse_erf(1.0 - zeta)) ** 2


def scenario1_flow_count(TC: float, alpha: float, epsilon: float) -> float:
    """Real-valued scenario-1 flow count before flooring."""
    x = TC / lambert_w(TC)
    return 0.5 * min((epsilon**2 / alpha) * (x - 1.0), x)


def plan_scenario1(inputs: PlannerInputs, *, C_override: float | None = None) -> ScenarioPlan:
    """Scenario 1: all flows fingerprinted; codebook size equals flow count.

    ``C_override`` substitutes a precomputed capacity (distinct-rates C').
    """
    C = capacity(inputs.lam, inputs.queue_specs) if C_override is None else C_override
    if C <= 0:
        raise InfeasibleScenarioError("nonpositive capacity")
    alpha = reliability_alpha(inputs.zeta)
    if alpha == 0.0:
        raise InfeasibleScenarioError("zeta = 1 gives alpha = 0 (empty buffering phase)")
    m_real = scenario1_flow_count(inputs.T * C, alpha, inputs.epsilon)
    # Guard against the solved-horizon case landing one ulp below an integer.
    m = math.floor(m_real + 1e-9)
    if m < 1:
        raise InfeasibleScenarioError(
            f"horizon too small: scenario-1 flow count {m_real:.3g} < 1"
        )
    ratio = m * alpha / inputs.epsilon**2
    T1 = inputs.T * ratio / (1.0 + ratio)
    T2 = inputs.T - T1
    delta = inputs.epsilon * math.sqrt(2.0 * inputs.lam / (m * T1))
    if delta >= inputs.lam:
        raise InfeasibleScenarioError("slow-down delta >= lambda")
    if not math.log(m) < C * T2:
        raise InfeasibleScenarioError("decodability bound ln(m) < C*T2 violated")
    return ScenarioPlan(
        scenario=Scenario.ALL_FLOWS,
        C=C,
        alpha=alpha,
        m=m,
        M=m,
        p=1.0,
        T=inputs.T,
        T1=T1,
        T2=T2,
        delta=delta,
        lam=inputs.lam,
    )


def horizon_for_flow_count(
    epsilon: float,
    zeta: float,
    lam: float,
    queue_specs: list[QueueSpec] | tuple[QueueSpec, ...],
    m_target: int,
) -> float:
    """Smallest horizon T for which scenario 1 plans exactly ``m_target`` flows."""
    if m_target < 1:
        raise ValueError("m_target must be >= 1")
    C = capacity(lam, queue_specs)
    alpha = reliability_alpha(zeta)
    if alpha == 0.0:
        raise InfeasibleScenarioError("zeta = 1 is infeasible")
    # m(T) >= m* iff TC/W(TC) >= max(2 m*, 1 + 2 m* alpha / eps^2); invert
    # x = TC/W(TC) through Fact 1 (x ln x = TC).
    x = max(2.0 * m_target, 1.0 + 2.0 * m_target * alpha / epsilon**2)
    return x * math.log(x) / C


# Raw counts beyond this are pointless to materialize as integers.
_MAX_PLANNABLE_LOG_COUNT = math.log(1e15)


def plan_scenario2(
    inputs: PlannerInputs,
    desk: DeskScale | None = None,
    *,
    C_override: float | None = None,
) -> ScenarioPlan:
    """Scenario 2: each flow fingerprinted independently with probability p.

    Raw counts explode like exp(2CT); without a ``DeskScale`` override any
    plan whose raw flow count exceeds ~1e15 is rejected.
    """
    C = capacity(inputs.lam, inputs.queue_specs) if C_override is None else C_override
    if C <= 0:
        raise InfeasibleScenarioError("nonpositive capacity")
    alpha = reliability_alpha(inputs.zeta)
    if alpha == 0.0:
        raise InfeasibleScenarioError("zeta = 1 gives alpha = 0")
    eps = inputs.epsilon
    sqrt_cta = math.sqrt(C * inputs.T * alpha)
    log_m_raw = 2.0 * C * inputs.T - sqrt_cta - math.log(2.0 * eps**2)
    log_p_raw = 2.0 * math.log(eps) - C * inputs.T
    # ln(1 + exp(sqrt_cta)) without overflow.
    log1pe = sqrt_cta + math.log1p(math.exp(-sqrt_cta))
    log_M_raw = C * inputs.T / (1.0 + alpha / log1pe) - math.log(2.0)

    if desk is None:
        if log_m_raw > _MAX_PLANNABLE_LOG_COUNT:
            raise InfeasibleScenarioError(
                "scenario-2 counts exceed representable range; "
                "desk-scale override required"
            )
        m = math.floor(math.exp(log_m_raw))
        M = math.floor(math.exp(log_M_raw))
        p = math.exp(log_p_raw)
    else:
        m = desk.m_cap
        if log_m_raw < math.log(desk.m_cap):
            m = math.floor(math.exp(log_m_raw))
        M_cap = desk.M_cap if desk.M_cap is not None else desk.m_cap
        M = M_cap
        if log_M_raw < math.log(M_cap):
            M = math.floor(math.exp(log_M_raw))
        p = desk.p if desk.p is not None else math.exp(log_p_raw)
    if m < 1:
        raise InfeasibleScenarioError("scenario-2 flow count < 1")
    if not 0 < p <= 1:
        raise InfeasibleScenarioError(f"fingerprint probability {p} outside (0, 1]")
    if M < m * p:
        raise InfeasibleScenarioError("codebook size M below expected demand m*p")

    L = math.log1p(eps**2 / (2.0 * m * p * p))
    T1 = inputs.T * alpha / (L + alpha)
    T2 = inputs.T - T1
    delta = math.sqrt(inputs.lam / T1 * L)
    if delta >= inputs.lam:
        raise InfeasibleScenarioError("slow-down delta >= lambda")
    return ScenarioPlan(
        scenario=Scenario.PROBABILISTIC,
        C=C,
        alpha=alpha,
        m=m,
        M=M,
        p=p,
        T=inputs.T,
        T1=T1,
        T2=T2,
        delta=delta,
        lam=inputs.lam,
        log_m_raw=log_m_raw,
        log_M_raw=log_M_raw,
        log_p_raw=log_p_raw,
        sqrt_cta=sqrt_cta,
    )


def poisson_kl_bound(m: int, p: float, delta: float, T1: float, lam: float) -> float:
    """Upper bound m * p^2 * (exp(delta^2 T1 / lambda) - 1) on D(P1 || P0)."""
    if min(m, p, T1, lam) <= 0 or delta < 0:
        raise ValueError("all arguments must be positive (delta >= 0)")
    if delta >= lam:
        raise ValueError("delta must be below lambda")
    return m * p * p * math.expm1(delta * delta * T1 / lam)
