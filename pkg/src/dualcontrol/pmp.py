"""Forward-backward sweep solver for the deterministic surrogate problem.

The solver alternates a forward state sweep, a backward costate sweep, and a
pointwise Hamiltonian minimization, relaxing the control update with an
exponentially decaying weight until the candidate control agrees with the
iterate. The hot loops are numba-compiled; the public functions wrap them
with the domain types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .surrogate import Z_FLOOR, SurrogateState, control_weight

__all__ = [
    "Costate",
    "ControlProfile",
    "SweepConfig",
    "SweepTrajectory",
    "CostateTrajectory",
    "hamiltonian",
    "minimize_hamiltonian",
    "forward_sweep",
    "backward_sweep",
    "solve_deterministic",
    "profile_objective",
    "apply_sign_rule",
    "signed_control",
    "shift_profile",
]


@dataclass(frozen=True, eq=False)
class Costate:
    """Adjoint variables; all components vanish at the terminal time."""

    lambda_z: np.ndarray
    lambda_y1: float
    lambda_y2: float

    def __post_init__(self):
        object.__setattr__(
            self, "lambda_z", np.atleast_1d(np.asarray(self.lambda_z, dtype=np.float64))
        )


@dataclass(frozen=True, eq=False)
class ControlProfile:
    """Nonnegative control magnitudes on a uniform grid over a horizon.

    `values[j, i]` is the magnitude of dimension i held on the j-th of
    `n_points` equal cells; the applied signed control is derived separately
    via the sign rule.
    """

    horizon: float
    values: np.ndarray  # (M, N)
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError(f"values must be a (points, dims) matrix, got shape {v.shape}")
        if np.any(v < 0):
            raise ValueError("control magnitudes must be non-negative")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        object.__setattr__(self, "values", v)

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    @property
    def cell_dt(self) -> float:
        return self.horizon / self.n_points

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.cell_dt


@dataclass(frozen=True)
class SweepConfig:
    """Tuning of the forward-backward sweep.

    The convergence residual is the grid average of squared differences
    between the iterate and the candidate control (`residual_norm="max"`
    switches to the maximum for sensitivity runs). The relaxation weight is
    max(exp(-omega_decay * iteration), omega_floor), reset at every solve;
    without the floor the iterate freezes short of the fixed point on
    bang-bang instances. Once the weight sits on the floor, a solve that has
    not improved its best residual by `stall_tolerance` (relative) over
    `stall_window` iterations gives up early with a warning.
    """

    epsilon: float = 1e-5
    omega_decay: float = 0.15
    omega_floor: float = 0.1
    max_iterations: int = 500
    grid_points: int | None = None  # None: caller decides (harness uses remaining intervals)
    n_sub: int = 10
    z_floor: float = Z_FLOOR
    control_bound: float = 1.0
    residual_norm: str = "mean"
    stall_window: int = 60
    stall_tolerance: float = 0.01

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.omega_decay > 0:
            raise ValueError("omega_decay must be > 0")
        if not 0.0 <= self.omega_floor <= 1.0:
            raise ValueError("omega_floor must be in [0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.grid_points is not None and self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.n_sub < 1:
            raise ValueError("n_sub must be >= 1")
        if not self.control_bound > 0:
            raise ValueError("control_bound must be > 0")
        if self.residual_norm not in ("mean", "max"):
            raise ValueError(f"unknown residual_norm {self.residual_norm!r}")
        if self.stall_window < 1:
            raise ValueError("stall_window must be >= 1")


@dataclass(frozen=True, eq=False)
class SweepTrajectory:
    """State trajectory on the fine integration grid (cells x sub-steps)."""

    times: np.ndarray  # (M*n_sub + 1,)
    z: np.ndarray      # (M*n_sub + 1, N)
    y1: np.ndarray
    y2: np.ndarray
    y0_anchor: float
    n_sub: int

    @property
    def node_times(self) -> np.ndarray:
        return self.times[:: self.n_sub]

    @property
    def node_z(self) -> np.ndarray:
        return self.z[:: self.n_sub]

    @property
    def node_y1(self) -> np.ndarray:
        return self.y1[:: self.n_sub]

    @property
    def node_y2(self) -> np.ndarray:
        return self.y2[:: self.n_sub]

    def state_at_node(self, j: int) -> SurrogateState:
        f = j * self.n_sub
        return SurrogateState(z=self.z[f].copy(), y1=float(self.y1[f]),
                              y2=float(self.y2[f]), y0_anchor=self.y0_anchor)


@dataclass(frozen=True, eq=False)
class CostateTrajectory:
    """Costate trajectory on the same fine grid as the forward states."""

    times: np.ndarray
    lambda_z: np.ndarray  # (M*n_sub + 1, N)
    lambda_y1: np.ndarray
    lambda_y2: np.ndarray
    n_sub: int

    @property
    def node_lambda_z(self) -> np.ndarray:
        return self.lambda_z[:: self.n_sub]

    @property
    def node_lambda_y1(self) -> np.ndarray:
        return self.lambda_y1[:: self.n_sub]

    @property
    def node_lambda_y2(self) -> np.ndarray:
        return self.lambda_y2[:: self.n_sub]

    def costate_at_node(self, j: int) -> Costate:
        f = j * self.n_sub
        return Costate(lambda_z=self.lambda_z[f].copy(),
                       lambda_y1=float(self.lambda_y1[f]),
                       lambda_y2=float(self.lambda_y2[f]))


def hamiltonian(s: SurrogateState, c: Costate, u) -> float:
    """Pointwise Hamiltonian of the surrogate problem.

    Quadratic in each control component: A*u_i^2 + B_i*u_i + const with
    A = 1 + 4*ly1*y1*(1-y1)^2 - 4*ly2*y2^2*(1-y2) and B_i = -lz_i*w.
    """
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    w = control_weight(s)
    zf = np.maximum(s.z, Z_FLOOR)
    u2 = float(np.sum(u * u))
    h = u2 + float(np.sum(s.z * s.z))
    h += float(np.sum(c.lambda_z * (1.0 / (math.pi * zf) - u * w)))
    h += 4.0 * c.lambda_y1 * s.y1 * (1.0 - s.y1) ** 2 * u2
    h -= 4.0 * c.lambda_y2 * s.y2 ** 2 * (1.0 - s.y2) * u2
    return h


def minimize_hamiltonian(s: SurrogateState, c: Costate, bound: float) -> np.ndarray:
    """Exact per-dimension minimizer of the Hamiltonian over [0, bound].

    Convex case: clamped vertex. Concave or linear case: the better endpoint,
    ties resolved to 0.
    """
    w = control_weight(s)
    a = (1.0 + 4.0 * c.lambda_y1 * s.y1 * (1.0 - s.y1) ** 2
         - 4.0 * c.lambda_y2 * s.y2 ** 2 * (1.0 - s.y2))
    b = -c.lambda_z * w
    out = np.empty_like(b)
    for i in range(b.size):
        if a > 0:
            out[i] = min(max(-b[i] / (2.0 * a), 0.0), bound)
        else:
            at_bound = a * bound * bound + b[i] * bound
            out[i] = bound if at_bound < 0.0 else 0.0
    return out


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _forward_kernel(z0, y1_0, y2_0, y0a, u, cell_dt, n_sub, z_floor):
    M, N = u.shape
    nf = M * n_sub
    h = cell_dt / n_sub
    pi = math.pi
    z = np.empty((nf + 1, N))
    y1 = np.empty(nf + 1)
    y2 = np.empty(nf + 1)
    for i in range(N):
        z[0, i] = z0[i]
    y1[0] = y1_0
    y2[0] = y2_0
    for j in range(M):
        su2 = 0.0
        for i in range(N):
            su2 += u[j, i] * u[j, i]
        for s in range(n_sub):
            t = j * n_sub + s
            a1 = y1[t]
            a2 = y2[t]
            # RK4 for the belief pair (independent of z)
            k1a = 4.0 * a1 * (1.0 - a1) ** 2 * su2
            k1b = -4.0 * a2 * a2 * (1.0 - a2) * su2
            b1 = a1 + 0.5 * h * k1a
            b2 = a2 + 0.5 * h * k1b
            k2a = 4.0 * b1 * (1.0 - b1) ** 2 * su2
            k2b = -4.0 * b2 * b2 * (1.0 - b2) * su2
            c1 = a1 + 0.5 * h * k2a
            c2 = a2 + 0.5 * h * k2b
            k3a = 4.0 * c1 * (1.0 - c1) ** 2 * su2
            k3b = -4.0 * c2 * c2 * (1.0 - c2) * su2
            d1 = a1 + h * k3a
            d2 = a2 + h * k3b
            k4a = 4.0 * d1 * (1.0 - d1) ** 2 * su2
            k4b = -4.0 * d2 * d2 * (1.0 - d2) * su2
            n1 = a1 + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            n2 = a2 + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            if n1 > 1.0:
                n1 = 1.0
            if n2 < 0.0:
                n2 = 0.0
            y1[t + 1] = n1
            y2[t + 1] = n2
            # belief weights at the four coupled RK4 stage points
            w1 = y0a * abs(2.0 * a1 - 1.0) + (1.0 - y0a) * abs(2.0 * a2 - 1.0)
            w2 = y0a * abs(2.0 * b1 - 1.0) + (1.0 - y0a) * abs(2.0 * b2 - 1.0)
            w3 = y0a * abs(2.0 * c1 - 1.0) + (1.0 - y0a) * abs(2.0 * c2 - 1.0)
            w4 = y0a * abs(2.0 * d1 - 1.0) + (1.0 - y0a) * abs(2.0 * d2 - 1.0)
            for i in range(N):
                zi = z[t, i]
                ui = u[j, i]
                if zi < 10.0 * z_floor:
                    # operator splitting near the singularity: exact
                    # square-root growth, then linear control decay
                    zn = math.sqrt(zi * zi + 2.0 * h / pi) - h * ui * w1
                else:
                    q1 = 1.0 / (pi * max(zi, z_floor)) - ui * w1
                    zq = zi + 0.5 * h * q1
                    q2 = 1.0 / (pi * max(zq, z_floor)) - ui * w2
                    zq = zi + 0.5 * h * q2
                    q3 = 1.0 / (pi * max(zq, z_floor)) - ui * w3
                    zq = zi + h * q3
                    q4 = 1.0 / (pi * max(zq, z_floor)) - ui * w4
                    zn = zi + h / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
                if zn < 0.0:
                    zn = 0.0
                z[t + 1, i] = zn
    return z, y1, y2


@njit(cache=True)
def _backward_kernel(u, cell_dt, n_sub, z_floor, z, y1, y2, y0a):
    M, N = u.shape
    nf = M * n_sub
    h = cell_dt / n_sub
    pi = math.pi
    lz = np.zeros((nf + 1, N))
    l1 = np.zeros(nf + 1)
    l2 = np.zeros(nf + 1)
    kz = np.empty((4, N))
    for j in range(M - 1, -1, -1):
        su2 = 0.0
        for i in range(N):
            su2 += u[j, i] * u[j, i]
        for s in range(n_sub - 1, -1, -1):
            t = j * n_sub + s
            # interpolate states at the backward half step
            y1e = y1[t + 1]
            y2e = y2[t + 1]
            y1m = 0.5 * (y1[t] + y1[t + 1])
            y2m = 0.5 * (y2[t] + y2[t + 1])
            y1s = y1[t]
            y2s = y2[t]
            s1e = 1.0 if 2.0 * y1e - 1.0 > 0 else (-1.0 if 2.0 * y1e - 1.0 < 0 else 0.0)
            s2e = 1.0 if 2.0 * y2e - 1.0 > 0 else (-1.0 if 2.0 * y2e - 1.0 < 0 else 0.0)
            s1m = 1.0 if 2.0 * y1m - 1.0 > 0 else (-1.0 if 2.0 * y1m - 1.0 < 0 else 0.0)
            s2m = 1.0 if 2.0 * y2m - 1.0 > 0 else (-1.0 if 2.0 * y2m - 1.0 < 0 else 0.0)
            s1s = 1.0 if 2.0 * y1s - 1.0 > 0 else (-1.0 if 2.0 * y1s - 1.0 < 0 else 0.0)
            s2s = 1.0 if 2.0 * y2s - 1.0 > 0 else (-1.0 if 2.0 * y2s - 1.0 < 0 else 0.0)
            # stage 1 at the right endpoint
            ulz = 0.0
            for i in range(N):
                zi = max(z[t + 1, i], z_floor)
                kz[0, i] = lz[t + 1, i] / (pi * zi * zi) - 2.0 * z[t + 1, i]
                ulz += u[j, i] * lz[t + 1, i]
            k1_1 = 2.0 * ulz * y0a * s1e - 4.0 * l1[t + 1] * (3.0 * y1e * y1e - 4.0 * y1e + 1.0) * su2
            k1_2 = 2.0 * ulz * (1.0 - y0a) * s2e + 4.0 * l2[t + 1] * y2e * (2.0 - 3.0 * y2e) * su2
            # stage 2 at the midpoint
            ulz = 0.0
            for i in range(N):
                zm = 0.5 * (z[t, i] + z[t + 1, i])
                zi = max(zm, z_floor)
                lzi = lz[t + 1, i] - 0.5 * h * kz[0, i]
                kz[1, i] = lzi / (pi * zi * zi) - 2.0 * zm
                ulz += u[j, i] * lzi
            l1m = l1[t + 1] - 0.5 * h * k1_1
            l2m = l2[t + 1] - 0.5 * h * k1_2
            k2_1 = 2.0 * ulz * y0a * s1m - 4.0 * l1m * (3.0 * y1m * y1m - 4.0 * y1m + 1.0) * su2
            k2_2 = 2.0 * ulz * (1.0 - y0a) * s2m + 4.0 * l2m * y2m * (2.0 - 3.0 * y2m) * su2
            # stage 3 at the midpoint
            ulz = 0.0
            for i in range(N):
                zm = 0.5 * (z[t, i] + z[t + 1, i])
                zi = max(zm, z_floor)
                lzi = lz[t + 1, i] - 0.5 * h * kz[1, i]
                kz[2, i] = lzi / (pi * zi * zi) - 2.0 * zm
                ulz += u[j, i] * lzi
            l1m = l1[t + 1] - 0.5 * h * k2_1
            l2m = l2[t + 1] - 0.5 * h * k2_2
            k3_1 = 2.0 * ulz * y0a * s1m - 4.0 * l1m * (3.0 * y1m * y1m - 4.0 * y1m + 1.0) * su2
            k3_2 = 2.0 * ulz * (1.0 - y0a) * s2m + 4.0 * l2m * y2m * (2.0 - 3.0 * y2m) * su2
            # stage 4 at the left endpoint
            ulz = 0.0
            for i in range(N):
                zi = max(z[t, i], z_floor)
                lzi = lz[t + 1, i] - h * kz[2, i]
                kz[3, i] = lzi / (pi * zi * zi) - 2.0 * z[t, i]
                ulz += u[j, i] * lzi
            l1s = l1[t + 1] - h * k3_1
            l2s = l2[t + 1] - h * k3_2
            k4_1 = 2.0 * ulz * y0a * s1s - 4.0 * l1s * (3.0 * y1s * y1s - 4.0 * y1s + 1.0) * su2
            k4_2 = 2.0 * ulz * (1.0 - y0a) * s2s + 4.0 * l2s * y2s * (2.0 - 3.0 * y2s) * su2
            for i in range(N):
                lz[t, i] = lz[t + 1, i] - h / 6.0 * (kz[0, i] + 2.0 * kz[1, i] + 2.0 * kz[2, i] + kz[3, i])
            l1[t] = l1[t + 1] - h / 6.0 * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1)
            l2[t] = l2[t + 1] - h / 6.0 * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2)
    return lz, l1, l2


@njit(cache=True)
def _candidate_kernel(z, y1, y2, lz, l1, l2, y0a, n_sub, bound):
    nf1, N = z.shape
    M = (nf1 - 1) // n_sub
    uc = np.empty((M, N))
    for j in range(M):
        f = j * n_sub
        w = y0a * abs(2.0 * y1[f] - 1.0) + (1.0 - y0a) * abs(2.0 * y2[f] - 1.0)
        a = (1.0 + 4.0 * l1[f] * y1[f] * (1.0 - y1[f]) ** 2
             - 4.0 * l2[f] * y2[f] * y2[f] * (1.0 - y2[f]))
        for i in range(N):
            b = -lz[f, i] * w
            if a > 0.0:
                v = -b / (2.0 * a)
                if v < 0.0:
                    v = 0.0
                elif v > bound:
                    v = bound
            else:
                v = bound if a * bound * bound + b * bound < 0.0 else 0.0
            uc[j, i] = v
    return uc


# ---------------------------------------------------------------------------
# public sweeps and solver
# ---------------------------------------------------------------------------

def forward_sweep(init: SurrogateState, profile: ControlProfile,
                  n_sub: int = 10, z_floor: float = Z_FLOOR) -> SweepTrajectory:
    """Integrate the surrogate dynamics forward under a piecewise-constant
    control profile; states are stored on the full sub-step grid."""
    u = profile.values
    if u.shape[1] != init.dims:
        raise ValueError(f"profile has {u.shape[1]} dims, state has {init.dims}")
    z, y1, y2 = _forward_kernel(init.z, init.y1, init.y2, init.y0_anchor,
                                u, profile.cell_dt, n_sub, z_floor)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y1)) and np.all(np.isfinite(y2))):
        raise RuntimeError("forward sweep produced non-finite state values")
    times = np.linspace(0.0, profile.horizon, u.shape[0] * n_sub + 1)
    return SweepTrajectory(times=times, z=z, y1=y1, y2=y2,
                           y0_anchor=init.y0_anchor, n_sub=n_sub)


def backward_sweep(profile: ControlProfile, states: SweepTrajectory,
                   z_floor: float = Z_FLOOR) -> CostateTrajectory:
    """Integrate the costate equations backward from the zero terminal
    condition along a given state trajectory."""
    u = profile.values
    expected = u.shape[0] * states.n_sub + 1
    if states.z.shape[0] != expected:
        raise ValueError(
            f"states cover {states.z.shape[0]} fine nodes, profile needs {expected}")
    lz, l1, l2 = _backward_kernel(u, profile.cell_dt, states.n_sub, z_floor,
                                  states.z, states.y1, states.y2, states.y0_anchor)
    if not (np.all(np.isfinite(lz)) and np.all(np.isfinite(l1)) and np.all(np.isfinite(l2))):
        raise RuntimeError("backward sweep produced non-finite costate values")
    return CostateTrajectory(times=states.times, lambda_z=lz,
                             lambda_y1=l1, lambda_y2=l2, n_sub=states.n_sub)


def profile_objective(init: SurrogateState, profile: ControlProfile,
                      n_sub: int = 10, z_floor: float = Z_FLOOR) -> float:
    """Surrogate objective of a control profile: int(|z|^2 + |u|^2) dt.

    The z part is a trapezoid rule on the fine grid; the control part is
    exact for piecewise-constant magnitudes.
    """
    traj = forward_sweep(init, profile, n_sub=n_sub, z_floor=z_floor)
    z2 = np.sum(traj.z * traj.z, axis=1)
    j_z = float(np.trapezoid(z2, traj.times))
    j_u = float(np.sum(profile.values ** 2) * profile.cell_dt)
    return j_z + j_u


def _fbs_iterate(z0: np.ndarray, y_now: float, u0: np.ndarray, horizon: float,
                 cfg: SweepConfig):
    """Run the sweep iteration from one initial control profile."""
    u = u0.copy()
    cell_dt = horizon / u.shape[0]
    residual = math.inf
    best = math.inf
    since_improvement = 0
    for tau in range(cfg.max_iterations):
        z, y1, y2 = _forward_kernel(z0, y_now, y_now, y_now, u, cell_dt,
                                    cfg.n_sub, cfg.z_floor)
        if not np.all(np.isfinite(z)):
            raise RuntimeError("forward sweep produced non-finite state values")
        lz, l1, l2 = _backward_kernel(u, cell_dt, cfg.n_sub, cfg.z_floor,
                                      z, y1, y2, y_now)
        if not np.all(np.isfinite(lz)):
            raise RuntimeError("backward sweep produced non-finite costate values")
        uc = _candidate_kernel(z, y1, y2, lz, l1, l2, y_now, cfg.n_sub,
                               cfg.control_bound)
        diff = (u - uc) ** 2
        residual = float(diff.max() if cfg.residual_norm == "max" else diff.mean())
        if residual < cfg.epsilon:
            return u, True, tau + 1, residual
        omega = max(math.exp(-cfg.omega_decay * tau), cfg.omega_floor)
        if residual < (1.0 - cfg.stall_tolerance) * best:
            best = residual
            since_improvement = 0
        elif omega == cfg.omega_floor:
            since_improvement += 1
            if since_improvement >= cfg.stall_window:
                return u, False, tau + 1, residual
        u = omega * uc + (1.0 - omega) * u
    return u, False, cfg.max_iterations, residual


def solve_deterministic(x_now, y_now: float, horizon: float, cfg: SweepConfig,
                        warm_start: ControlProfile | None = None) -> ControlProfile:
    """Solve the surrogate optimal-control problem from the current state.

    With a warm start the previous profile seeds the iteration. Cold starts
    run the sweep from both the zero profile and the full-bound profile and
    keep the cheaper result: at maximal uncertainty (belief exactly 1/2) the
    zero profile is a degenerate fixed point of the sweep map, so a single
    zero initialization would never discover the probing solutions.

    Non-convergence after max_iterations is reported on the returned profile,
    not raised.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if not 0.0 <= y_now <= 1.0:
        raise ValueError(f"y_now must be in [0, 1], got {y_now}")
    x_now = np.atleast_1d(np.asarray(x_now, dtype=np.float64))
    n = x_now.size
    if cfg.grid_points is not None:
        m = cfg.grid_points
    elif warm_start is not None:
        m = max(2, warm_start.n_points)
    else:
        m = 100
    z0 = np.abs(x_now)
    bound = cfg.control_bound

    if warm_start is not None:
        w = np.clip(warm_start.values, 0.0, bound)
        if w.shape != (m, n):
            w = _fit_profile(w, m, n)
        inits = [w]
    else:
        inits = [np.zeros((m, n)), np.full((m, n), bound)]

    best = None
    best_obj = math.inf
    init_state = SurrogateState(z=z0, y1=y_now, y2=y_now, y0_anchor=y_now)
    for u0 in inits:
        u, converged, iterations, residual = _fbs_iterate(z0, y_now, u0, horizon, cfg)
        prof = ControlProfile(horizon=horizon, values=u, converged=converged,
                              iterations=iterations, residual=residual)
        obj = profile_objective(init_state, prof, n_sub=cfg.n_sub, z_floor=cfg.z_floor)
        if obj < best_obj:
            best, best_obj = prof, obj
    return best


def _fit_profile(values: np.ndarray, m: int, n: int) -> np.ndarray:
    """Pad (repeating the last row) or truncate a profile to m rows."""
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[1] != n:
        raise ValueError(f"warm start has {values.shape[1]} dims, expected {n}")
    if values.shape[0] >= m:
        return values[:m].copy()
    out = np.empty((m, n))
    out[: values.shape[0]] = values
    out[values.shape[0]:] = values[-1]
    return out


def shift_profile(profile: ControlProfile, steps: int, n_points: int) -> ControlProfile:
    """Warm-start helper: drop the first `steps` rows (the cells already
    applied) and refit to `n_points` rows over the shortened horizon."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    remaining = profile.values[min(steps, profile.n_points - 1):]
    horizon = n_points * profile.cell_dt
    return ControlProfile(horizon=horizon,
                          values=_fit_profile(remaining, n_points, profile.dims))


def apply_sign_rule(u_magnitude: float, x_i: float, y_now: float) -> float:
    """Signed control from a magnitude: -sgn(x) * sgn(2y - 1) * |u|.

    Zero arguments take sign +1, a fixed deterministic tie-break: at x = 0 or
    belief exactly 1/2, either direction is cost-indifferent in expectation,
    and suppressing the control would suppress learning.
    """
    sx = 1.0 if x_i >= 0 else -1.0
    sy = 1.0 if 2.0 * y_now - 1.0 >= 0 else -1.0
    return -sx * sy * u_magnitude


def signed_control(magnitudes, x, y_now: float) -> np.ndarray:
    """Vectorized sign rule over dimensions."""
    magnitudes = np.atleast_1d(np.asarray(magnitudes, dtype=np.float64))
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    sx = np.where(x >= 0, 1.0, -1.0)
    sy = 1.0 if 2.0 * y_now - 1.0 >= 0 else -1.0
    return -sx * sy * magnitudes
