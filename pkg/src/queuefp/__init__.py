"""Invisible network-flow fingerprinting over parallel exponential-server queues.

Simulation framework for a two-phase buffer-and-release fingerprinting
scheme: a planner derives the phase split, slow-down, and codebook sizes
from a detectability budget epsilon and a reliability slack zeta; an
embedder re-times Poisson flows; an optimal-detector adversary tests the
phase-1 counts; a maximum-likelihood decoder recovers fingerprints from
the queue outputs.
"""

__version__ = "1.0.0"

from .numerics import (
    DeskScale,
    InfeasibleScenarioError,
    PlannerInputs,
    QueueSpec,
    Scenario,
    ScenarioPlan,
    capacity,
    plan_scenario1,
    plan_scenario2,
)

__all__ = [
    "DeskScale",
    "InfeasibleScenarioError",
    "PlannerInputs",
    "QueueSpec",
    "Scenario",
    "ScenarioPlan",
    "capacity",
    "plan_scenario1",
    "plan_scenario2",
    "__version__",
]
