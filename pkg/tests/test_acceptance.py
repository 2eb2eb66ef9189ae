"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one pass/fail line per
criterion. The suite is seedful throughout; heavy pieces reuse module-scoped
policies. Reference statistics are the published benchmark values bundled in
the table registry.
"""

import math
import time

import numpy as np
import pytest

from oracles import assert_gradient_consistent, enum_value

from dualcontrol.cli import main as cli_main
from dualcontrol.dp import backward_induction, build_transitions, estimate_memory_bytes
from dualcontrol.dynamics import belief_posterior, eta
from dualcontrol.harness import ControllerKind, ExperimentConfig, run_experiment, run_simulation
from dualcontrol.pmp import ControlProfile, SweepConfig, forward_sweep, solve_deterministic
from dualcontrol.problem import ModelId, ProblemSpec, RandomStream, build_grid
from dualcontrol.surrogate import SurrogateState, belief_upper_bound, xi


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"[acceptance] criterion {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}")


def _spec(dims=1, x0=0.0, y0=0.5, bound=1.0):
    return ProblemSpec(dims=dims, horizon=10.0, steps=100, control_bound=bound,
                       x0=np.full(dims, x0, dtype=float), y0=y0)


def _dp_policy(spec, grids):
    return backward_induction(build_transitions(build_grid(spec, *grids), spec))


def _dp_experiment(spec, grids, n, seed, record=False):
    policy = _dp_policy(spec, grids)
    cfg = ExperimentConfig(spec=spec, controller=ControllerKind("dp", policy=policy),
                           n_simulations=n, seed=seed, record_trajectories=record)
    return run_experiment(cfg)


def _oc_experiment(spec, n, seed, resolve_every=1, record=False):
    cfg = ExperimentConfig(spec=spec,
                           controller=ControllerKind("oc", resolve_every=resolve_every),
                           n_simulations=n, seed=seed,
                           sweep=SweepConfig(control_bound=spec.control_bound),
                           record_trajectories=record)
    return run_experiment(cfg)


def _combined_3se(ref_ci, our_ci):
    return 3.0 * math.sqrt((ref_ci / 1.96) ** 2 + (our_ci / 1.96) ** 2)


def test_criterion_01_dp_baseline_instance():
    spec = _spec(x0=0.0)
    t0 = time.perf_counter()
    policy = _dp_policy(spec, (70, 45, 35))
    solve_s = time.perf_counter() - t0
    cfg = ExperimentConfig(spec=spec, controller=ControllerKind("dp", policy=policy),
                           n_simulations=500, seed=2024)
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    sim_s = time.perf_counter() - t0
    ok = 14.2 <= result.mean_cost <= 19.2 and solve_s <= 300 and sim_s <= 60
    _report(1, ok, f"mean {result.mean_cost:.2f} +/- {result.ci95_halfwidth:.2f} "
                   f"in [14.2, 19.2]; solve {solve_s:.0f}s, sim {sim_s:.0f}s")
    assert 14.2 <= result.mean_cost <= 19.2
    assert solve_s <= 300 and sim_s <= 60


def test_criterion_02_dp_transient_instances():
    details = []
    ok = True
    for x0, ref, ref_ci in [(5.0, 93.1, 6.0), (15.0, 1294.3, 37.0)]:
        result = _dp_experiment(_spec(x0=x0), (50, 20, 15), 500, seed=101)
        lo = ref - ref_ci - result.ci95_halfwidth
        hi = ref + ref_ci + result.ci95_halfwidth
        inside = lo <= result.mean_cost <= hi
        details.append(f"x0={x0:g}: {result.mean_cost:.1f} in [{lo:.1f}, {hi:.1f}]")
        ok = ok and inside
        assert inside
        if x0 == 15.0:
            rel = abs(result.mean_cost - ref) / ref
            details.append(f"rel {rel:.3f}")
            ok = ok and rel <= 0.05
            assert rel <= 0.05
    _report(2, ok, "; ".join(details))


def test_criterion_03_oc_online_instances():
    # warm the JIT so the per-solve timing excludes compilation
    solve_deterministic([1.0], 0.6, 1.0, SweepConfig(grid_points=10, control_bound=1.0))
    t0 = time.perf_counter()
    prof = solve_deterministic([5.0], 0.5, 10.0,
                               SweepConfig(grid_points=100, control_bound=1.0))
    per_solve = time.perf_counter() - t0
    assert prof.converged
    details = [f"cold solve {per_solve * 1e3:.0f}ms"]
    ok = per_solve <= 2.0
    for x0, y0, ref, ref_ci in [(0.0, 0.5, 16.7, 2.4), (5.0, 1.0, 60.9, 3.1)]:
        t0 = time.perf_counter()
        result = _oc_experiment(_spec(x0=x0, y0=y0), n=100, seed=5)
        elapsed = time.perf_counter() - t0
        band = _combined_3se(ref_ci, result.ci95_halfwidth)
        inside = abs(result.mean_cost - ref) <= band
        details.append(f"x0={x0:g},y0={y0:g}: {result.mean_cost:.1f} "
                       f"(ref {ref} +/- {band:.1f}, {elapsed:.0f}s)")
        ok = ok and inside and elapsed <= 4 * 3600
        assert inside
        assert elapsed <= 4 * 3600
    # smoke tier: n=20 at re-solve cadence 2 must finish within 30 minutes
    t0 = time.perf_counter()
    _oc_experiment(_spec(x0=0.0), n=20, seed=6, resolve_every=2)
    smoke = time.perf_counter() - t0
    ok = ok and smoke <= 1800
    details.append(f"smoke n=20 m=2 {smoke:.0f}s")
    _report(3, ok, "; ".join(details))
    assert per_solve <= 2.0
    assert smoke <= 1800


def test_criterion_04_multidimensional_separation():
    spec3 = _spec(dims=3, x0=0.0)
    oc = _oc_experiment(spec3, n=100, seed=5)
    band = _combined_3se(1.3, oc.ci95_halfwidth)
    oc_ok = abs(oc.mean_cost - 35.3) <= band
    dp = _dp_experiment(spec3, (20, 15, 5), 500, seed=5)
    dp_ok = dp.mean_cost >= 40.0
    # the 4-D solve must refuse to start within a 10 GB budget
    spec4 = _spec(dims=4, x0=0.0)
    est = estimate_memory_bytes(build_grid(spec4, 20, 15, 5), spec4)
    code = cli_main(["solve-dp", "--dims", "4", "--x0", "0", "--nx", "20",
                     "--ny", "15", "--na", "5", "--memory-budget", "10",
                     "--out-dir", "/tmp/accept_dp4"])
    budget_ok = code == 3 and est > 10e9
    ok = oc_ok and dp_ok and budget_ok
    _report(4, ok, f"OC 3-D {oc.mean_cost:.1f} (35.3 +/- {band:.1f}); "
                   f"DP 3-D {dp.mean_cost:.1f} >= 40; 4-D exit {code} "
                   f"(needs {est / 1e9:.0f} GB)")
    assert oc_ok and dp_ok and budget_ok


def test_criterion_05_dp_exactness_oracle():
    rng = np.random.default_rng(321)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        spec = ProblemSpec(dims=1, horizon=float(rng.uniform(0.3, 1.5)), steps=3,
                           control_bound=float(rng.uniform(0.5, 2.0)),
                           x0=[float(rng.uniform(-1.5, 1.5))],
                           y0=float(rng.uniform(0.1, 0.9)))
        transitions = build_transitions(build_grid(spec, 5, 3, 3), spec)
        policy = backward_induction(transitions)
        for x_flat in range(5):
            for y_idx in range(3):
                diff = abs(policy.values[0, x_flat, y_idx]
                           - enum_value(transitions, x_flat, y_idx, 0))
                worst = max(worst, diff)
                assert diff <= 1e-12
    _report(5, True, f"20 instances, max |V - enum| = {worst:.2e} "
                     f"({time.perf_counter() - t0:.1f}s)")


def test_criterion_06_adjoint_gradient_checks():
    rng = np.random.default_rng(654)
    t0 = time.perf_counter()
    converged = 0
    attempts = 0
    while converged < 10 and attempts < 15:
        attempts += 1
        x0 = float(rng.uniform(0.5, 8.0))
        y0 = float(rng.uniform(0.1, 0.9))
        horizon = float(rng.uniform(2.0, 10.0))
        points = max(10, int(round(10 * horizon)))
        prof = solve_deterministic([x0], y0, horizon,
                                   SweepConfig(grid_points=points, control_bound=1.0))
        if not prof.converged:
            continue
        assert_gradient_consistent(prof, x0, y0, rel_tol=1e-2)
        converged += 1
    assert converged == 10
    _report(6, True, f"10 converged solves verified at every interior cell "
                     f"({attempts} attempts, {time.perf_counter() - t0:.1f}s)")


def test_criterion_07_diffusion_calibration():
    spec = _spec(x0=0.0)
    cfg = ExperimentConfig(spec=spec, controller=ControllerKind("null"),
                           n_simulations=1, seed=77)
    n = 100_000
    checks = {10: 0.0, 50: 0.0, 100: 0.0}  # steps for t = 1, 5, 10
    t0 = time.perf_counter()
    for i in range(n):
        rec = run_simulation(cfg, RandomStream(77, i))
        for k in checks:
            checks[k] += abs(rec.states[k, 0])
    details = []
    ok = True
    for k, total in checks.items():
        t = k * spec.delta
        rel = abs(total / n - xi(t)) / xi(t)
        details.append(f"t={t:g}: rel {rel:.4f}")
        ok = ok and rel < 0.02
        assert rel < 0.02
    _report(7, ok, "; ".join(details) + f" ({time.perf_counter() - t0:.0f}s)")


def test_criterion_08_belief_properties():
    # martingale under the predictive mixture
    rng = RandomStream(99).generator()
    n = 100_000
    y, u, dt = 0.35, 0.9, 0.1
    model1 = rng.random(n) < y
    dx = np.where(model1, u * dt, -u * dt) + math.sqrt(dt) * rng.standard_normal(n)
    posts = belief_posterior(y, 2 * u * dx)
    mart_dev = abs(posts.mean() - y)
    mart_tol = 3 * posts.std() / math.sqrt(n)
    assert mart_dev < mart_tol
    # eta derivative identities at v = 0
    h = 1e-5
    for yy in (0.15, 0.5, 0.85):
        d1 = (eta(yy, h) - eta(yy, -h)) / (2 * h)
        d2 = (eta(yy, h) - 2 * eta(yy, 0.0) + eta(yy, -h)) / h ** 2
        assert d1 == pytest.approx(yy * (1 - yy), rel=1e-4)
        assert d2 == pytest.approx(yy * (1 - yy) * (1 - 2 * yy), rel=1e-4, abs=1e-6)
    # learning bound along deterministic belief trajectories
    gen = np.random.default_rng(13)
    for _ in range(5):
        y0 = float(gen.uniform(0.05, 0.95))
        m = 50
        u_prof = gen.uniform(0.0, 1.0, size=(m, 1))
        traj = forward_sweep(SurrogateState(z=np.array([1.0]), y1=y0, y2=y0, y0_anchor=y0),
                             ControlProfile(horizon=5.0, values=u_prof))
        energy = np.concatenate([[0.0], np.cumsum(u_prof[:, 0] ** 2) * (5.0 / m)])
        bounds = np.array([belief_upper_bound(y0, e) for e in energy])
        assert np.all(1.0 - traj.node_y1 <= bounds + 1e-6)
    _report(8, True, f"martingale dev {mart_dev:.2e} < {mart_tol:.2e}; "
                     f"eta derivatives at 1e-4; bound respected to 1e-6")


def test_criterion_09_figure_reproduction():
    # 1-D probing case
    spec = _spec(x0=5.0)
    res = _dp_experiment(spec, (50, 20, 15), 500, seed=5, record=True)
    controls = np.stack([r.controls for r in res.records])[:, :, 0]
    beliefs = np.stack([r.beliefs for r in res.records])
    models = np.array([r.true_model.value for r in res.records])
    med_absu = np.median(np.abs(controls), axis=0)
    k_t1 = 10  # t = 1
    bang = bool(np.all(med_absu[:k_t1] == spec.control_bound))
    m2 = models == ModelId.MODEL2.value
    truth_m2 = np.median(1.0 - beliefs[m2][:, 30])  # t = 3
    ok1 = bang and truth_m2 >= 0.95
    assert bang
    assert truth_m2 >= 0.95
    # 2-D case: belief settles on the truth within two time units
    spec2 = ProblemSpec(dims=2, horizon=10.0, steps=100, control_bound=1.0,
                        x0=[0.0, 5.0], y0=0.5)
    res2 = _dp_experiment(spec2, (30, 20, 5), 500, seed=5, record=True)
    beliefs2 = np.stack([r.beliefs for r in res2.records])
    models2 = np.array([r.true_model.value for r in res2.records])
    k_t2 = 20
    meds = []
    for value in (ModelId.MODEL1.value, ModelId.MODEL2.value):
        sel = models2 == value
        truth = beliefs2[sel][:, k_t2] if value == 1 else 1.0 - beliefs2[sel][:, k_t2]
        meds.append(float(np.median(truth)))
    ok2 = min(meds) >= 0.95
    _report(9, ok1 and ok2,
            f"median |u|=U for t<1: {bang}; truth-belief at t=3 {truth_m2:.3f}; "
            f"2-D truth-belief at t=2 {min(meds):.3f}")
    assert ok2


def test_criterion_10_bitwise_determinism(tmp_path):
    dp_dir = tmp_path / "dp"
    assert cli_main(["solve-dp", "--x0", "0", "--nx", "21", "--ny", "9",
                     "--na", "5", "--out-dir", str(dp_dir)]) == 0
    args = ["simulate", "--method", "dp", "--policy", str(dp_dir / "policy.npz"),
            "--x0", "0", "--n", "20", "--seed", "31", "--bands"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli_main(args + ["--out-dir", str(a)]) == 0
    assert cli_main(args + ["--out-dir", str(b)]) == 0
    identical = all((a / f).read_bytes() == (b / f).read_bytes()
                    for f in ("summary.csv", "runs.csv", "bands.csv"))
    _report(10, identical, "summary.csv, runs.csv, bands.csv bit-identical "
                           "across repeated seeded runs")
    assert identical
