"""Shrinking-horizon Monte-Carlo evaluation of the controllers.

Each run draws the true model, then steps the SDE for K intervals, asking the
controller for a signed control at every step: the online optimal-control
variant re-solves the deterministic surrogate on the remaining horizon (warm
started from the previous solution), the dynamic-programming variant reads an
offline policy table, and a null variant (test hook) applies zero control.
Simulations are independent; aggregation reduces costs in run-index order so
parallel and serial runs agree exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dp import DpPolicy, policy_lookup
from .dynamics import TransitionObservation, draw_true_model, step_state, update_belief
from .pmp import SweepConfig, shift_profile, signed_control, solve_deterministic
from .problem import (
    AggregateResult,
    ModelId,
    ProblemSpec,
    RandomStream,
    SimulationRecord,
    stage_cost,
)

__all__ = [
    "ControllerKind",
    "ExperimentConfig",
    "run_simulation",
    "run_experiment",
    "emit_figure_data",
    "nearest_rank_percentile",
]


@dataclass(frozen=True)
class ControllerKind:
    """Which controller drives the simulation.

    method "oc" solves the surrogate problem online every `resolve_every`
    steps; "dp" requires an offline policy for the same problem; "null" is a
    zero-control test hook.
    """

    method: str
    policy: DpPolicy | None = None
    resolve_every: int = 1

    def __post_init__(self):
        if self.method not in ("oc", "dp", "null"):
            raise ValueError(f"unknown controller method {self.method!r}")
        if self.method == "dp" and self.policy is None:
            raise ValueError("dp controller requires a policy")
        if self.resolve_every < 1:
            raise ValueError("resolve_every must be >= 1")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    spec: ProblemSpec
    controller: ControllerKind
    n_simulations: int = 500
    seed: int = 0
    sweep: SweepConfig | None = None
    record_trajectories: bool = False
    zero_noise: bool = False  # test hook: forces every Wiener increment to 0
    jobs: int = 1

    def __post_init__(self):
        if self.n_simulations < 1:
            raise ValueError("n_simulations must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.controller.method == "dp" and not self.controller.policy.spec.same_problem(self.spec):
            raise ValueError("dp policy was built for a different problem")


def run_simulation(cfg: ExperimentConfig, stream: RandomStream) -> SimulationRecord:
    """One closed-loop run; the stream fixes both the model draw and the noise."""
    spec = cfg.spec
    rng = stream.generator()
    n, k_steps, delta = spec.dims, spec.steps, spec.delta
    y_true = draw_true_model(spec.y0, rng)
    x = spec.x0.copy()
    y = spec.y0
    states = np.empty((k_steps + 1, n))
    beliefs = np.empty(k_steps + 1)
    controls = np.empty((k_steps, n))
    states[0] = x
    beliefs[0] = y
    total = 0.0
    warnings = 0
    method = cfg.controller.method
    profile = None
    last_solve = 0
    if method == "oc":
        base = cfg.sweep if cfg.sweep is not None else SweepConfig()
        base = replace(base, control_bound=spec.control_bound)
    zero = np.zeros(n) if cfg.zero_noise else None
    for k in range(k_steps):
        if method == "oc":
            elapsed = k - last_solve
            if profile is None or elapsed >= cfg.controller.resolve_every:
                points = max(k_steps - k, 2)
                warm = None if profile is None else shift_profile(profile, elapsed, points)
                scfg = replace(base, grid_points=points)
                profile = solve_deterministic(x, y, spec.horizon - k * delta, scfg,
                                              warm_start=warm)
                if not profile.converged:
                    warnings += 1
                last_solve = k
                elapsed = 0
            mags = profile.values[min(elapsed, profile.n_points - 1)]
            u = signed_control(mags, x, y)
        elif method == "dp":
            u = policy_lookup(cfg.controller.policy, x, y, k)
        else:
            u = np.zeros(n)
        total += stage_cost(x, u, delta)
        controls[k] = u
        x_next = step_state(x, u, y_true, delta, rng, noise=zero)
        y = update_belief(y, TransitionObservation(x, x_next, u, delta))
        x = x_next
        states[k + 1] = x
        beliefs[k + 1] = y
    return SimulationRecord(times=spec.times, states=states, beliefs=beliefs,
                            controls=controls, total_cost=total, true_model=y_true,
                            solver_warnings=warnings)


_WORKER_CFG: ExperimentConfig | None = None


def _init_worker(cfg: ExperimentConfig) -> None:
    global _WORKER_CFG
    _WORKER_CFG = cfg


def _run_indexed(index: int) -> SimulationRecord:
    cfg = _WORKER_CFG
    return run_simulation(cfg, RandomStream(cfg.seed, index))


def run_experiment(cfg: ExperimentConfig) -> AggregateResult:
    """Run the configured batch and aggregate cost statistics and bands."""
    n = cfg.n_simulations
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_init_worker,
                                 initargs=(cfg,)) as pool:
            records = list(pool.map(_run_indexed, range(n), chunksize=32))
    else:
        records = [run_simulation(cfg, RandomStream(cfg.seed, i)) for i in range(n)]
    costs = np.array([r.total_cost for r in records])
    models = np.array([r.true_model.value for r in records])
    mean = float(costs.mean())
    if n >= 2:
        ci = float(1.96 * costs.std(ddof=1) / math.sqrt(n))
    else:
        ci = None
    bands = _percentile_bands(records) if cfg.record_trajectories else None
    return AggregateResult(
        mean_cost=mean,
        ci95_halfwidth=ci,
        n_simulations=n,
        costs=costs,
        true_models=models,
        percentile_bands=bands,
        solver_warnings=sum(r.solver_warnings for r in records),
        records=tuple(records) if cfg.record_trajectories else (),
    )


def nearest_rank_percentile(values: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    """Nearest-rank percentile: the sample at rank ceil(q/100 * n)."""
    values = np.sort(np.asarray(values), axis=axis)
    n = values.shape[axis]
    rank = max(1, math.ceil(q / 100.0 * n))
    return np.take(values, rank - 1, axis=axis)


_BAND_QS = (5.0, 50.0, 95.0)


def _percentile_bands(records) -> dict:
    times = records[0].times
    states = np.stack([r.states for r in records])      # (n, K+1, N)
    beliefs = np.stack([r.beliefs for r in records])    # (n, K+1)
    controls = np.stack([r.controls for r in records])  # (n, K, N)
    models = np.array([r.true_model.value for r in records])
    bands = {"times": times}
    bands["x"] = np.stack([nearest_rank_percentile(states, q) for q in _BAND_QS])
    for model in (ModelId.MODEL1, ModelId.MODEL2):
        sel = models == model.value
        if not np.any(sel):
            continue
        tag = f"model{model.value}"
        bands[f"u_{tag}"] = np.stack(
            [nearest_rank_percentile(controls[sel], q) for q in _BAND_QS])
        bands[f"y_{tag}"] = np.stack(
            [nearest_rank_percentile(beliefs[sel], q) for q in _BAND_QS])
    return bands


def emit_figure_data(result: AggregateResult, path) -> None:
    """Write per-time-step percentile bands as CSV.

    One row per time step: state percentiles over all runs, control and
    belief percentiles split by the true model. Control columns are empty on
    the final row (a control applies to the interval it opens).
    """
    bands = result.percentile_bands
    if not bands:
        raise ValueError("no trajectory data: run with record_trajectories enabled")
    times = bands["times"]
    n_steps = times.size - 1
    dims = bands["x"].shape[2]
    header = ["time"]
    for d in range(dims):
        header += [f"x{d + 1}_p{int(q)}" for q in _BAND_QS]
    model_tags = [t for t in ("model1", "model2") if f"u_{t}" in bands]
    for tag in model_tags:
        for d in range(dims):
            header += [f"u{d + 1}_{tag}_p{int(q)}" for q in _BAND_QS]
        header += [f"y_{tag}_p{int(q)}" for q in _BAND_QS]
    lines = [",".join(header)]
    for k in range(n_steps + 1):
        row = [repr(float(times[k]))]
        for d in range(dims):
            row += [repr(float(bands["x"][i, k, d])) for i in range(3)]
        for tag in model_tags:
            for d in range(dims):
                if k < n_steps:
                    row += [repr(float(bands[f"u_{tag}"][i, k, d])) for i in range(3)]
                else:
                    row += ["", "", ""]
            row += [repr(float(bands[f"y_{tag}"][i, k])) for i in range(3)]
        lines.append(",".join(row))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write figure data to {path}: {exc}") from exc
