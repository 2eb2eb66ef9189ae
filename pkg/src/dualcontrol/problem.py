"""Problem description, discretization grids, random streams, and result containers.

Everything here is immutable after construction and safe to share across
concurrent workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelId",
    "ProblemSpec",
    "Grid",
    "RandomStream",
    "SimulationRecord",
    "AggregateResult",
    "build_grid",
    "stage_cost",
    "nearest_index",
]


class ModelId(enum.Enum):
    """Which of the two candidate SDEs governs the true dynamics.

    MODEL1 has drift +u, MODEL2 has drift -u.
    """

    MODEL1 = 1
    MODEL2 = 2


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One control problem instance.

    dims physical states, horizon split into `steps` equal control intervals,
    control magnitudes bounded by `control_bound`, initial state `x0` and
    prior belief `y0` that MODEL1 is the true dynamics.
    """

    dims: int = 1
    horizon: float = 10.0
    steps: int = 100
    control_bound: float = 1.0
    x0: np.ndarray = field(default=None)  # type: ignore[assignment]
    y0: float = 0.5

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError(f"dims must be >= 1, got {self.dims}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if not self.control_bound > 0:
            raise ValueError(f"control_bound must be > 0, got {self.control_bound}")
        if not 0.0 <= self.y0 <= 1.0:
            raise ValueError(f"y0 must be in [0, 1], got {self.y0}")
        x0 = self.x0
        if x0 is None:
            x0 = np.zeros(self.dims)
        x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
        if x0.size == 1 and self.dims > 1:
            x0 = np.full(self.dims, float(x0[0]))
        if x0.shape != (self.dims,):
            raise ValueError(f"x0 must have {self.dims} entries, got shape {x0.shape}")
        object.__setattr__(self, "x0", _as_readonly(x0))

    @property
    def delta(self) -> float:
        """Length of one control interval."""
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def same_problem(self, other: "ProblemSpec") -> bool:
        return (
            self.dims == other.dims
            and self.steps == other.steps
            and self.horizon == other.horizon
            and self.control_bound == other.control_bound
            and self.y0 == other.y0
            and bool(np.array_equal(self.x0, other.x0))
        )


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform discretization of state, belief, and action spaces.

    `x_edges` has shape (dims, n_x + 1) and `x_centers` (dims, n_x); the
    belief levels include 0 and 1, the action levels include 0 and the
    control bound.
    """

    x_edges: np.ndarray
    x_centers: np.ndarray
    y_levels: np.ndarray
    a_levels: np.ndarray

    def __post_init__(self):
        for name in ("x_edges", "x_centers", "y_levels", "a_levels"):
            object.__setattr__(self, name, _as_readonly(getattr(self, name)))
        if self.y_levels[0] != 0.0 or self.y_levels[-1] != 1.0:
            raise ValueError("y_levels must start at 0 and end at 1")
        if self.a_levels[0] != 0.0:
            raise ValueError("a_levels must start at 0")

    @property
    def dims(self) -> int:
        return self.x_centers.shape[0]

    @property
    def n_x(self) -> int:
        return self.x_centers.shape[1]

    @property
    def n_y(self) -> int:
        return self.y_levels.size

    @property
    def n_a(self) -> int:
        return self.a_levels.size

    @property
    def n_cells(self) -> int:
        """Total number of physical cells (n_x per dimension, tensor product)."""
        return self.n_x ** self.dims

    def x_index(self, x) -> np.ndarray:
        """Per-dimension index of the nearest center; out-of-range values clamp
        to the boundary cells (projection)."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = np.empty(self.dims, dtype=np.int64)
        for d in range(self.dims):
            out[d] = nearest_index(x[d], self.x_centers[d])
        return out

    def y_index(self, y: float) -> int:
        return int(nearest_index(y, self.y_levels))

    def flat_cell(self, idx) -> int:
        """Row-major flattening of a per-dimension cell index tuple."""
        flat = 0
        for d in range(self.dims):
            flat = flat * self.n_x + int(idx[d])
        return flat

    def unflatten_cell(self, flat: int) -> tuple:
        idx = []
        for _ in range(self.dims):
            idx.append(flat % self.n_x)
            flat //= self.n_x
        return tuple(reversed(idx))


def nearest_index(value: float, levels: np.ndarray) -> int:
    """Index of the level nearest to `value` on a uniform ascending grid.

    Exact midpoints resolve to the lower level; values outside the range
    clamp to the end levels.
    """
    n = levels.size
    if n == 1:
        return 0
    step = (levels[-1] - levels[0]) / (n - 1)
    r = (value - levels[0]) / step
    i = int(math.ceil(r - 0.5))
    return min(max(i, 0), n - 1)


def build_grid(spec: ProblemSpec, n_x: int, n_y: int, n_a: int) -> Grid:
    """Uniform grids covering three Wiener standard deviations around x0.

    Each physical dimension gets n_x bins over [x0_d - 3*sqrt(T), x0_d + 3*sqrt(T)],
    n_y belief levels over [0, 1], and n_a action magnitudes over [0, U].
    """
    if n_x < 2 or n_y < 2 or n_a < 2:
        raise ValueError(f"grid counts must all be >= 2, got {n_x}/{n_y}/{n_a}")
    half = 3.0 * math.sqrt(spec.horizon)
    edges = np.empty((spec.dims, n_x + 1))
    centers = np.empty((spec.dims, n_x))
    for d in range(spec.dims):
        e = np.linspace(spec.x0[d] - half, spec.x0[d] + half, n_x + 1)
        edges[d] = e
        centers[d] = 0.5 * (e[:-1] + e[1:])
    y_levels = np.linspace(0.0, 1.0, n_y)
    a_levels = np.linspace(0.0, spec.control_bound, n_a)
    return Grid(x_edges=edges, x_centers=centers, y_levels=y_levels, a_levels=a_levels)


def stage_cost(x, u, delta: float) -> float:
    """Running cost of one control interval: delta * (|u|^2 + |x|^2)."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    x = np.asarray(x, dtype=np.float64).ravel()
    u = np.asarray(u, dtype=np.float64).ravel()
    return float(delta * (u @ u + x @ x))


@dataclass(frozen=True)
class RandomStream:
    """Seedful stream identity: distinct (seed, stream_id) pairs give
    statistically independent generators, identical pairs reproduce
    bit-identical draws."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.seed, self.stream_id)))


@dataclass(frozen=True, eq=False)
class SimulationRecord:
    """Full trajectory of a single closed-loop run."""

    times: np.ndarray       # (K+1,)
    states: np.ndarray      # (K+1, N)
    beliefs: np.ndarray     # (K+1,)
    controls: np.ndarray    # (K, N), signed controls actually applied
    total_cost: float
    true_model: ModelId
    solver_warnings: int = 0

    def __post_init__(self):
        for name in ("times", "states", "beliefs", "controls"):
            object.__setattr__(self, name, _as_readonly(getattr(self, name)))

    @property
    def delta(self) -> float:
        return float(self.times[1] - self.times[0])

    def recompute_cost(self) -> float:
        """Accumulate the stage costs from the stored trajectory, in step order."""
        total = 0.0
        d = self.delta
        for k in range(self.controls.shape[0]):
            total += stage_cost(self.states[k], self.controls[k], d)
        return total


@dataclass(frozen=True, eq=False)
class AggregateResult:
    """Cost statistics (and optional trajectory percentiles) over a batch of runs."""

    mean_cost: float
    ci95_halfwidth: float | None
    n_simulations: int
    costs: np.ndarray
    true_models: np.ndarray  # (n,) of ModelId values
    percentile_bands: dict | None = None
    solver_warnings: int = 0
    records: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "costs", _as_readonly(self.costs))
