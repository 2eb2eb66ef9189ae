"""Dual control of a two-model SDE.

A library and CLI for a continuous-time dual-control benchmark: an online
Pontryagin-based controller built on a deterministic surrogate model, a
finite-horizon dynamic-programming baseline on a discretized belief MDP, and
a Monte-Carlo shrinking-horizon evaluation harness.
"""

__version__ = "0.1.0"

from .problem import (
    AggregateResult,
    Grid,
    ModelId,
    ProblemSpec,
    RandomStream,
    SimulationRecord,
    build_grid,
    stage_cost,
)

__all__ = [
    "AggregateResult",
    "Grid",
    "ModelId",
    "ProblemSpec",
    "RandomStream",
    "SimulationRecord",
    "build_grid",
    "stage_cost",
    "__version__",
]
