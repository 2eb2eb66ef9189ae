"""Benchmark instance registry for the cost-table reproduction.

Each row fixes a problem instance, the dynamic-programming grid sizes used
for it, and the published reference statistics (mean cost and 95% confidence
half-width over 500 runs) for side-by-side comparison. Rows whose
dynamic-programming solve exceeded the reference 10 GB memory budget carry
no DP reference.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dp import MemoryBudgetError, backward_induction, build_transitions
from .harness import ControllerKind, ExperimentConfig, run_experiment
from .pmp import SweepConfig
from .problem import ProblemSpec, build_grid

__all__ = ["TableRow", "TABLE_ROWS", "row_by_key", "run_table_row"]

DEFAULT_MEMORY_BUDGET_BYTES = int(10e9)


@dataclass(frozen=True)
class TableRow:
    key: str
    dims: int
    x0: tuple
    y0: float
    control_bound: float
    dp_grid: tuple  # (n_x per dimension, n_y, n_a)
    dp_reference: tuple | None  # (mean, ci95) or None when out of memory
    oc_reference: tuple

    def spec(self, horizon: float = 10.0, steps: int = 100) -> ProblemSpec:
        return ProblemSpec(dims=self.dims, horizon=horizon, steps=steps,
                           control_bound=self.control_bound,
                           x0=np.asarray(self.x0), y0=self.y0)


TABLE_ROWS = (
    TableRow("x0=0", 1, (0.0,), 0.5, 1.0, (70, 45, 35), (16.7, 1.5), (16.7, 2.4)),
    TableRow("x0=5", 1, (5.0,), 0.5, 1.0, (50, 20, 15), (93.1, 6.0), (96.6, 7.9)),
    TableRow("x0=15", 1, (15.0,), 0.5, 1.0, (50, 20, 15), (1294.3, 37.0), (1295.1, 38.4)),
    TableRow("x0=0_U=5", 1, (0.0,), 0.5, 5.0, (70, 45, 35), (13.1, 0.6), (12.8, 0.5)),
    TableRow("x0=0_y0=1", 1, (0.0,), 1.0, 1.0, (70, 45, 35), (11.2, 0.5), (11.5, 0.7)),
    TableRow("x0=5_y0=1", 1, (5.0,), 1.0, 1.0, (50, 20, 15), (63.6, 3.2), (60.9, 3.1)),
    TableRow("2d_coarse", 2, (0.0, 0.0), 0.5, 1.0, (10, 20, 5), (99.4, 4.7), (26.6, 1.4)),
    TableRow("2d", 2, (0.0, 0.0), 0.5, 1.0, (30, 20, 5), (28.2, 1.4), (26.6, 1.4)),
    TableRow("3d", 3, (0.0, 0.0, 0.0), 0.5, 1.0, (20, 15, 5), (43.0, 1.5), (35.3, 1.3)),
    TableRow("4d", 4, (0.0,) * 4, 0.5, 1.0, (20, 15, 5), None, (46.4, 1.3)),
    TableRow("10d", 10, (0.0,) * 10, 0.5, 1.0, (20, 15, 5), None, (124.4, 2.6)),
)


def row_by_key(key: str) -> TableRow:
    for row in TABLE_ROWS:
        if row.key == key:
            return row
    raise KeyError(f"unknown table row {key!r}; known: {[r.key for r in TABLE_ROWS]}")


def run_table_row(row: TableRow, method: str, n_simulations: int, seed: int,
                  jobs: int = 1, resolve_every: int = 1,
                  memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET_BYTES) -> dict:
    """Run one row with one method; returns a result dict for table emission.

    DP rows that exceed the memory budget return status "out_of_memory"
    instead of statistics.
    """
    spec = row.spec()
    out = {
        "row": row.key, "method": method, "dims": row.dims, "y0": row.y0,
        "control_bound": row.control_bound, "n": n_simulations,
        "nx": row.dp_grid[0], "ny": row.dp_grid[1], "na": row.dp_grid[2],
        "status": "ok", "mean_cost": None, "ci95_halfwidth": None,
        "solver_warnings": 0, "time_offline_s": 0.0, "time_online_s": 0.0,
    }
    reference = row.dp_reference if method == "dp" else row.oc_reference
    out["reference_mean"] = None if reference is None else reference[0]
    out["reference_ci95"] = None if reference is None else reference[1]
    if method == "dp":
        grid = build_grid(spec, *row.dp_grid)
        t0 = time.perf_counter()
        try:
            transitions = build_transitions(
                grid, spec, memory_budget_bytes=memory_budget_bytes)
        except MemoryBudgetError:
            out["status"] = "out_of_memory"
            return out
        policy = backward_induction(transitions)
        out["time_offline_s"] = time.perf_counter() - t0
        controller = ControllerKind("dp", policy=policy)
    elif method == "oc":
        controller = ControllerKind("oc", resolve_every=resolve_every)
    else:
        raise ValueError(f"unknown method {method!r}")
    cfg = ExperimentConfig(spec=spec, controller=controller,
                           n_simulations=n_simulations, seed=seed,
                           sweep=SweepConfig(control_bound=spec.control_bound),
                           jobs=jobs)
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    out["time_online_s"] = time.perf_counter() - t0
    out["mean_cost"] = result.mean_cost
    out["ci95_halfwidth"] = result.ci95_halfwidth
    out["solver_warnings"] = result.solver_warnings
    return out
