"""Ground-truth SDE stepping and the exact Bayesian belief update.

The drift is constant over a control interval, so state transitions are
sampled exactly (Gaussian increments), not by an Euler scheme. All functions
are stateless; concurrent use only requires distinct random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import ModelId

__all__ = [
    "TransitionObservation",
    "draw_true_model",
    "step_state",
    "update_belief",
    "belief_posterior",
    "eta",
]


@dataclass(frozen=True)
class TransitionObservation:
    """One observed state transition under a known constant control."""

    x_before: np.ndarray
    x_after: np.ndarray
    u_applied: np.ndarray   # signed control held constant over the interval
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        object.__setattr__(self, "x_before", np.atleast_1d(np.asarray(self.x_before, dtype=np.float64)))
        object.__setattr__(self, "x_after", np.atleast_1d(np.asarray(self.x_after, dtype=np.float64)))
        object.__setattr__(self, "u_applied", np.atleast_1d(np.asarray(self.u_applied, dtype=np.float64)))

    @property
    def dx(self) -> np.ndarray:
        return self.x_after - self.x_before


def draw_true_model(y0: float, rng: np.random.Generator) -> ModelId:
    """Draw the governing model: MODEL1 with probability y0, else MODEL2."""
    if not 0.0 <= y0 <= 1.0:
        raise ValueError(f"y0 must be in [0, 1], got {y0}")
    return ModelId.MODEL1 if rng.random() < y0 else ModelId.MODEL2


def step_state(
    x,
    u,
    model: ModelId,
    dt: float,
    rng: np.random.Generator | None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Advance the true state by one interval: x +/- u*dt + sqrt(dt)*xi.

    The sign of the drift is + for MODEL1 and - for MODEL2; xi are independent
    standard normal draws. Passing `noise` overrides the draws (test hook,
    e.g. zeros for drift-only checks).
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if noise is None:
        noise = rng.standard_normal(x.size)
    sign = 1.0 if model is ModelId.MODEL1 else -1.0
    return x + sign * u * dt + math.sqrt(dt) * noise


def belief_posterior(y, v):
    """Posterior belief y*e^v / (y*e^v + 1 - y), evaluated overflow-safe.

    `v` is the log likelihood ratio of the two models for an observed
    transition. Vectorized over `v`; the result is clamped to [0, 1].
    Beliefs of exactly 0 or 1 are absorbing for any `v`.
    """
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    y, v = np.broadcast_arrays(y, v)
    # exponentiate the negative magnitude only, so large |v| cannot overflow;
    # a zero denominator only occurs at the absorbing endpoints, where the
    # posterior equals y
    e_neg = np.exp(-np.abs(v))
    den_pos = y + (1.0 - y) * e_neg
    den_neg = y * e_neg + (1.0 - y)
    pos = np.divide(y, den_pos, out=y.astype(np.float64, copy=True), where=den_pos > 0)
    neg = np.divide(y * e_neg, den_neg, out=y.astype(np.float64, copy=True), where=den_neg > 0)
    out = np.clip(np.where(v >= 0, pos, neg), 0.0, 1.0)
    return out if out.ndim else float(out)


def update_belief(y: float, obs: TransitionObservation) -> float:
    """Bayes update of the belief in MODEL1 after one observed transition.

    With constant control over the interval the likelihood-ratio exponent
    reduces to v = 2 * sum_i u_i * dx_i; the per-dimension Wiener components
    are independent so the exponents add.
    """
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"y must be in [0, 1], got {y}")
    v = 2.0 * float(np.dot(obs.u_applied, obs.dx))
    return _posterior_scalar(y, v)


def _posterior_scalar(y: float, v: float) -> float:
    # same guarded evaluation as belief_posterior, without array dispatch
    # (this sits on the per-step hot path of every simulation)
    if v >= 0:
        e = math.exp(-v)
        den = y + (1.0 - y) * e
        post = y / den if den > 0 else y
    else:
        e = math.exp(v)
        den = y * e + (1.0 - y)
        post = (y * e) / den if den > 0 else y
    return min(max(post, 0.0), 1.0)


def eta(y, v):
    """Belief increment y(1-y)(e^v - 1) / (y e^v + 1 - y).

    Equals belief_posterior(y, v) - y. Guarded against overflow for large
    |v|: tends to 1-y as v -> +inf and to -y as v -> -inf.
    """
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    y, v = np.broadcast_arrays(y, v)
    # same guarded evaluation as belief_posterior; a zero denominator only
    # occurs at y in {0, 1}, where eta is identically 0
    e_neg = np.exp(-np.abs(v))
    den_pos = y + (1.0 - y) * e_neg
    den_neg = y * e_neg + (1.0 - y)
    pos = np.divide(y * (1.0 - y) * (1.0 - e_neg), den_pos,
                    out=np.zeros_like(den_pos), where=den_pos > 0)
    neg = np.divide(y * (1.0 - y) * (e_neg - 1.0), den_neg,
                    out=np.zeros_like(den_neg), where=den_neg > 0)
    out = np.where(v >= 0, pos, neg)
    return out if out.ndim else float(out)
