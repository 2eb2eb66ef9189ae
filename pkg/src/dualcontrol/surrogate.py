"""Deterministic surrogate dynamics for the dual-control problem.

The surrogate replaces the stochastic states by expected-value dynamics:
z_i tracks |x_i|, while y1 and y2 are the belief trajectories conditioned on
each model being true. The anchor belief at the start of the solve weights
the control effectiveness mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Z_FLOOR",
    "SurrogateState",
    "SurrogateDerivative",
    "control_weight",
    "rhs_surrogate",
    "xi",
    "xi_rate",
    "belief_upper_bound",
]

# floor applied to z inside 1/(pi*z) terms; keeps the drift bounded near the
# z=0 singularity (the exact uncontrolled solution leaves z=0 instantly)
Z_FLOOR = 1e-3


@dataclass(frozen=True, eq=False)
class SurrogateState:
    """State of the deterministic model: z per dimension plus the two belief
    trajectories and the anchor belief y0 fixed at solve start."""

    z: np.ndarray
    y1: float
    y2: float
    y0_anchor: float

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=np.float64))
        if np.any(z < 0):
            raise ValueError("z components must be non-negative")
        for name, val in (("y1", self.y1), ("y2", self.y2), ("y0_anchor", self.y0_anchor)):
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {val}")
        object.__setattr__(self, "z", z)

    @property
    def dims(self) -> int:
        return self.z.size


class SurrogateDerivative(NamedTuple):
    dz: np.ndarray
    dy1: float
    dy2: float


def control_weight(s: SurrogateState) -> float:
    """Mixture weight multiplying the control in dz/dt.

    w = y0*|2*y1 - 1| + (1 - y0)*|2*y2 - 1|; starts at |2*y0 - 1| and grows
    toward 1 as the conditional beliefs approach certainty.
    """
    return s.y0_anchor * abs(2.0 * s.y1 - 1.0) + (1.0 - s.y0_anchor) * abs(2.0 * s.y2 - 1.0)


def rhs_surrogate(s: SurrogateState, u, z_floor: float = Z_FLOOR) -> SurrogateDerivative:
    """Time derivatives of the surrogate state under control magnitudes u.

    dz_i/dt = 1/(pi*max(z_i, z_floor)) - u_i * w
    dy1/dt  =  4*y1*(1-y1)^2 * sum(u^2)
    dy2/dt  = -4*y2^2*(1-y2) * sum(u^2)
    """
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    w = control_weight(s)
    dz = 1.0 / (math.pi * np.maximum(s.z, z_floor)) - u * w
    u2 = float(np.sum(u * u))
    dy1 = 4.0 * s.y1 * (1.0 - s.y1) ** 2 * u2
    dy2 = -4.0 * s.y2 ** 2 * (1.0 - s.y2) * u2
    return SurrogateDerivative(dz=dz, dy1=dy1, dy2=dy2)


def xi(t):
    """Expected modulus of an uncontrolled Wiener state started at 0: sqrt(2t/pi)."""
    return np.sqrt(2.0 * np.asarray(t, dtype=np.float64) / math.pi)


def xi_rate(t):
    """Growth rate of xi, in reciprocal form: d(xi)/dt = 1/(pi*xi(t))."""
    return 1.0 / (math.pi * xi(t))


def belief_upper_bound(y0: float, u_energy: float) -> float:
    """Bound on the residual uncertainty 1 - y1(t) given spent control energy.

    For a trajectory of dy1/dt started at y0 with integral of u^2 equal to
    `u_energy`, 1 - y1(t) <= (1 - y0) / (1 + 4*y0*(1-y0)*u_energy).
    """
    if not 0.0 < y0 < 1.0:
        raise ValueError(f"y0 must be strictly inside (0, 1), got {y0}")
    if u_energy < 0:
        raise ValueError(f"u_energy must be >= 0, got {u_energy}")
    return (1.0 - y0) / (1.0 + 4.0 * y0 * (1.0 - y0) * u_energy)
