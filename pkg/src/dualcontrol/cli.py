"""Command-line front end.

Subcommands: solve-oc (one deterministic surrogate solve), solve-dp (offline
policy construction), simulate (Monte-Carlo evaluation of either controller),
and table1 (multi-row benchmark reproduction). Option precedence is
command-line flags, then a key = value config file, then built-in defaults.
Every run writes a manifest sufficient to reproduce it; numeric CSV output is
full double precision.

Exit codes: 0 success, 1 usage or validation error, 2 solver convergence
warning, 3 memory budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import DEFAULT_MEMORY_BUDGET_BYTES, TABLE_ROWS, row_by_key, run_table_row
from .dp import (
    MemoryBudgetError,
    backward_induction,
    build_transitions,
    load_policy,
    save_policy,
)
from .harness import ControllerKind, ExperimentConfig, emit_figure_data, run_experiment
from .pmp import SweepConfig, solve_deterministic
from .problem import ProblemSpec, build_grid

__all__ = ["main"]

_REQUIRED = object()

# built-in defaults: the benchmark's standard instance
_DEFAULTS = {
    "x0": "0",
    "y0": 0.5,
    "T": 10.0,
    "K": 100,
    "U": 1.0,
    "dims": None,
    "seed": 0,
    "jobs": 1,
    "out_dir": "runs",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; the contract is 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dualcontrol", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_shared(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--x0", help="comma-separated initial state")
        p.add_argument("--y0", type=float, help="prior belief in the +u model")
        p.add_argument("--T", type=float, help="time horizon")
        p.add_argument("--K", type=int, help="number of control intervals")
        p.add_argument("--U", type=float, help="control magnitude bound")
        p.add_argument("--dims", type=int, help="state dimension (broadcasts scalar --x0)")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--jobs", type=int, help="parallel simulation workers")
        p.add_argument("--out-dir", help="output directory")

    p = sub.add_parser("solve-oc", help="solve the deterministic surrogate problem once")
    add_shared(p)
    p.add_argument("--grid-points", type=int, help="control grid points (default K)")

    p = sub.add_parser("solve-dp", help="build and store a dynamic-programming policy")
    add_shared(p)
    p.add_argument("--nx", type=int, help="state bins per dimension")
    p.add_argument("--ny", type=int, help="belief levels")
    p.add_argument("--na", type=int, help="action magnitudes")
    p.add_argument("--memory-budget", type=float, help="budget in GB (default 10)")

    p = sub.add_parser("simulate", help="Monte-Carlo evaluation of a controller")
    add_shared(p)
    p.add_argument("--method", choices=["oc", "dp"], help="controller")
    p.add_argument("--n", type=int, help="number of simulations (default 500)")
    p.add_argument("--policy", help="policy file (required for dp)")
    p.add_argument("--bands", action="store_true", default=None,
                   help="emit percentile band data")
    p.add_argument("--resolve-every", type=int,
                   help="oc: re-solve cadence in steps (default 1)")

    p = sub.add_parser("table1", help="run benchmark table rows")
    add_shared(p)
    p.add_argument("--rows", help="comma-separated row keys, 'all', or 'none'")
    p.add_argument("--n", type=int, help="simulations per row (default 500)")
    p.add_argument("--methods", help="comma-separated subset of dp,oc (default both)")
    p.add_argument("--memory-budget", type=float, help="budget in GB (default 10)")
    return parser


def _read_config(path: str) -> dict:
    values = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args, config: dict, name: str, default, cast=None):
    """Flag > config file > default; _REQUIRED defaults reject omission."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is None and name in config:
        value = config[name]
    if value is None:
        if default is _REQUIRED:
            raise _UsageError(f"missing required option --{name.replace('_', '-')}")
        return default
    if cast is not None and isinstance(value, str):
        return cast(value)
    return value


def _parse_x0(text: str, dims: int | None) -> np.ndarray:
    try:
        vec = np.array([float(part) for part in str(text).split(",") if part.strip() != ""])
    except ValueError as exc:
        raise _UsageError(f"bad --x0 {text!r}: {exc}") from None
    if vec.size == 0:
        raise _UsageError("bad --x0: empty vector")
    if dims is not None:
        if vec.size == 1 and dims > 1:
            vec = np.full(dims, vec[0])
        elif vec.size != dims:
            raise _UsageError(f"--x0 has {vec.size} entries but --dims is {dims}")
    return vec


def _resolve_spec(args, config, required=()) -> ProblemSpec:
    get = lambda name, cast: _resolve(
        args, config, name, _REQUIRED if name in required else _DEFAULTS[name], cast)
    dims = get("dims", int)
    x0 = _parse_x0(get("x0", str), dims)
    try:
        return ProblemSpec(
            dims=dims if dims is not None else x0.size,
            horizon=get("T", float),
            steps=get("K", int),
            control_bound=get("U", float),
            x0=x0,
            y0=get("y0", float),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


class _Manifest:
    """key = value run manifest, written at start and finalized at the end."""

    def __init__(self, out_dir: Path, command: str, params: dict):
        self.path = out_dir / "manifest.txt"
        self.params = {"command": command, "version": __version__, **params}
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}
        self._write("running")

    def add_output(self, path: Path) -> None:
        self.outputs.append(path.name)

    def _write(self, status: str) -> None:
        lines = [f"status = {status}"]
        lines += [f"{k} = {v}" for k, v in self.params.items()]
        lines += [f"{k} = {v:.3f}" for k, v in self.timings.items()]
        lines += [f"output_{i} = {name}" for i, name in enumerate(self.outputs, 1)]
        self.path.write_text("\n".join(lines) + "\n")

    def finalize(self) -> None:
        self._write("completed")


def _fmt(value) -> str:
    """Full-precision, round-trippable formatting for CSV cells."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _out_dir(args, config) -> Path:
    out = Path(_resolve(args, config, "out_dir", _DEFAULTS["out_dir"], str))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_solve_oc(args, config) -> int:
    spec = _resolve_spec(args, config, required=("x0", "y0", "T", "U"))
    out = _out_dir(args, config)
    points = _resolve(args, config, "grid_points", spec.steps, int)
    manifest = _Manifest(out, "solve-oc", {
        "x0": ",".join(repr(float(v)) for v in spec.x0), "y0": repr(spec.y0),
        "T": repr(spec.horizon), "K": spec.steps, "U": repr(spec.control_bound),
        "dims": spec.dims, "grid_points": points,
    })
    cfg = SweepConfig(grid_points=points, control_bound=spec.control_bound)
    t0 = time.perf_counter()
    profile = solve_deterministic(spec.x0, spec.y0, spec.horizon, cfg)
    manifest.timings["time_solve_s"] = time.perf_counter() - t0
    path = out / "profile.csv"
    header = ["time"] + [f"u{d + 1}" for d in range(spec.dims)]
    rows = [[t] + list(vals) for t, vals in zip(profile.times, profile.values)]
    _write_csv(path, header, rows)
    manifest.add_output(path)
    manifest.params["converged"] = profile.converged
    manifest.params["iterations"] = profile.iterations
    manifest.finalize()
    print(f"wrote {path} (converged={profile.converged}, "
          f"iterations={profile.iterations}, u(0)={profile.values[0]})")
    return 0 if profile.converged else 2


def _cmd_solve_dp(args, config) -> int:
    spec = _resolve_spec(args, config)
    out = _out_dir(args, config)
    n_x = _resolve(args, config, "nx", 70, int)
    n_y = _resolve(args, config, "ny", 45, int)
    n_a = _resolve(args, config, "na", 35, int)
    budget_gb = _resolve(args, config, "memory_budget",
                         DEFAULT_MEMORY_BUDGET_BYTES / 1e9, float)
    manifest = _Manifest(out, "solve-dp", {
        "x0": ",".join(repr(float(v)) for v in spec.x0), "y0": repr(spec.y0),
        "T": repr(spec.horizon), "K": spec.steps, "U": repr(spec.control_bound),
        "dims": spec.dims, "nx": n_x, "ny": n_y, "na": n_a,
        "memory_budget_gb": repr(budget_gb),
    })
    try:
        grid = build_grid(spec, n_x, n_y, n_a)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    t0 = time.perf_counter()
    try:
        transitions = build_transitions(grid, spec,
                                        memory_budget_bytes=int(budget_gb * 1e9))
    except MemoryBudgetError as exc:
        print(str(exc), file=sys.stderr)
        manifest.params["error"] = "out of memory budget"
        manifest.finalize()
        return 3
    policy = backward_induction(transitions)
    manifest.timings["time_offline_s"] = time.perf_counter() - t0
    policy_path = out / "policy.npz"
    save_policy(policy, policy_path)
    manifest.add_output(policy_path)
    start_value = policy.values[0, grid.flat_cell(grid.x_index(spec.x0)),
                                grid.y_index(spec.y0)]
    summary_path = out / "policy_summary.csv"
    _write_csv(summary_path,
               ["dims", "K", "nx", "ny", "na", "n_cells", "transitions_nnz",
                "value_at_start", "grid_hash"],
               [[spec.dims, spec.steps, n_x, n_y, n_a, grid.n_cells,
                 transitions.nnz, start_value, policy.grid_hash]])
    manifest.add_output(summary_path)
    manifest.finalize()
    print(f"wrote {policy_path} (V(x0, y0, 0) = {start_value:.4f})")
    return 0


def _cmd_simulate(args, config) -> int:
    spec = _resolve_spec(args, config)
    out = _out_dir(args, config)
    method = _resolve(args, config, "method", _REQUIRED, str)
    if method not in ("oc", "dp"):
        raise _UsageError(f"--method must be oc or dp, got {method!r}")
    n = _resolve(args, config, "n", 500, int)
    seed = _resolve(args, config, "seed", _DEFAULTS["seed"], int)
    jobs = _resolve(args, config, "jobs", _DEFAULTS["jobs"], int)
    bands = bool(_resolve(args, config, "bands", False,
                          lambda s: s.lower() in ("1", "true", "yes")))
    resolve_every = _resolve(args, config, "resolve_every", 1, int)
    policy_path = _resolve(args, config, "policy", None, str)
    manifest = _Manifest(out, "simulate", {
        "method": method, "n": n, "seed": seed, "jobs": jobs,
        "x0": ",".join(repr(float(v)) for v in spec.x0), "y0": repr(spec.y0),
        "T": repr(spec.horizon), "K": spec.steps, "U": repr(spec.control_bound),
        "dims": spec.dims, "bands": bands, "resolve_every": resolve_every,
        "policy": policy_path or "",
    })
    offline = 0.0
    if method == "dp":
        if policy_path is None:
            raise _UsageError("--method dp requires --policy")
        t0 = time.perf_counter()
        try:
            policy = load_policy(policy_path)
        except (OSError, ValueError, KeyError) as exc:
            print(f"cannot load policy {policy_path}: {exc}", file=sys.stderr)
            return 1
        offline = time.perf_counter() - t0
        if not policy.spec.same_problem(spec):
            print(f"policy {policy_path} was built for a different problem "
                  f"(dims/horizon/steps/bound/x0/y0 mismatch)", file=sys.stderr)
            return 1
        controller = ControllerKind("dp", policy=policy)
    else:
        controller = ControllerKind("oc", resolve_every=resolve_every)
    cfg = ExperimentConfig(spec=spec, controller=controller, n_simulations=n,
                           seed=seed, sweep=SweepConfig(control_bound=spec.control_bound),
                           record_trajectories=bands, jobs=jobs)
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    manifest.timings["time_offline_s"] = offline
    manifest.timings["time_online_s"] = time.perf_counter() - t0
    summary_path = out / "summary.csv"
    _write_csv(summary_path,
               ["method", "n", "mean_cost", "ci95_halfwidth", "solver_warnings", "seed"],
               [[method, n, result.mean_cost, result.ci95_halfwidth,
                 result.solver_warnings, seed]])
    manifest.add_output(summary_path)
    runs_path = out / "runs.csv"
    _write_csv(runs_path, ["run", "true_model", "total_cost"],
               [[i, int(m), c] for i, (m, c) in
                enumerate(zip(result.true_models, result.costs))])
    manifest.add_output(runs_path)
    if bands:
        bands_path = out / "bands.csv"
        emit_figure_data(result, bands_path)
        manifest.add_output(bands_path)
    manifest.finalize()
    ci = "n/a" if result.ci95_halfwidth is None else f"{result.ci95_halfwidth:.3f}"
    print(f"{method}: mean cost {result.mean_cost:.3f} +/- {ci} over {n} runs "
          f"({result.solver_warnings} solver warnings)")
    return 0


# timings stay out of the CSV so reruns with one seed are bit-identical;
# they are recorded per row in the manifest instead
_TABLE_HEADER = ["row", "method", "dims", "y0", "control_bound", "nx", "ny", "na",
                 "n", "status", "mean_cost", "ci95_halfwidth", "reference_mean",
                 "reference_ci95", "solver_warnings"]


def _cmd_table1(args, config) -> int:
    out = _out_dir(args, config)
    rows_arg = _resolve(args, config, "rows", "all", str)
    n = _resolve(args, config, "n", 500, int)
    seed = _resolve(args, config, "seed", _DEFAULTS["seed"], int)
    jobs = _resolve(args, config, "jobs", _DEFAULTS["jobs"], int)
    methods_arg = _resolve(args, config, "methods", "dp,oc", str)
    budget_gb = _resolve(args, config, "memory_budget",
                         DEFAULT_MEMORY_BUDGET_BYTES / 1e9, float)
    methods = [m.strip() for m in methods_arg.split(",") if m.strip()]
    for m in methods:
        if m not in ("dp", "oc"):
            raise _UsageError(f"unknown method {m!r} in --methods")
    if rows_arg == "none":
        rows = []
    elif rows_arg == "all":
        rows = list(TABLE_ROWS)
    else:
        try:
            rows = [row_by_key(key.strip()) for key in rows_arg.split(",")]
        except KeyError as exc:
            raise _UsageError(str(exc)) from None
    manifest = _Manifest(out, "table1", {
        "rows": ",".join(r.key for r in rows) or "none",
        "methods": ",".join(methods), "n": n, "seed": seed, "jobs": jobs,
        "memory_budget_gb": repr(budget_gb),
    })
    results = []
    t0 = time.perf_counter()
    for row in rows:
        for method in methods:
            res = run_table_row(row, method, n, seed, jobs=jobs,
                                memory_budget_bytes=int(budget_gb * 1e9))
            results.append([res.get(key, "") for key in _TABLE_HEADER])
            manifest.timings[f"time_{row.key}_{method}_offline_s"] = res["time_offline_s"]
            manifest.timings[f"time_{row.key}_{method}_online_s"] = res["time_online_s"]
            status = res["status"]
            shown = ("out of memory" if status == "out_of_memory"
                     else f"{res['mean_cost']:.1f} +/- {res['ci95_halfwidth']:.1f}")
            print(f"{row.key:12s} {method}: {shown}")
    manifest.timings["time_total_s"] = time.perf_counter() - t0
    table_path = out / "table1.csv"
    _write_csv(table_path, _TABLE_HEADER, results)
    manifest.add_output(table_path)
    manifest.finalize()
    print(f"wrote {table_path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        config = _read_config(args.config) if getattr(args, "config", None) else {}
        handler = {
            "solve-oc": _cmd_solve_oc,
            "solve-dp": _cmd_solve_dp,
            "simulate": _cmd_simulate,
            "table1": _cmd_table1,
        }[args.command]
        return handler(args, config)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
