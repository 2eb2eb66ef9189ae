import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualcontrol.problem import (
    Grid,
    ModelId,
    ProblemSpec,
    RandomStream,
    SimulationRecord,
    build_grid,
    nearest_index,
    stage_cost,
)


def test_spec_defaults_and_delta():
    spec = ProblemSpec()
    assert spec.dims == 1
    assert spec.delta == pytest.approx(0.1)
    assert spec.times.shape == (101,)
    assert spec.x0.shape == (1,)


def test_spec_broadcasts_scalar_x0():
    spec = ProblemSpec(dims=3, x0=2.0)
    assert np.array_equal(spec.x0, [2.0, 2.0, 2.0])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dims=0),
        dict(steps=0),
        dict(horizon=0.0),
        dict(horizon=-1.0),
        dict(control_bound=0.0),
        dict(y0=-0.1),
        dict(y0=1.1),
        dict(x0=[1.0, 2.0]),  # wrong length for dims=1
    ],
)
def test_spec_rejects_bad_fields(kwargs):
    with pytest.raises(ValueError):
        ProblemSpec(**kwargs)


def test_spec_same_problem():
    a = ProblemSpec(x0=[1.0])
    assert a.same_problem(ProblemSpec(x0=[1.0]))
    assert not a.same_problem(ProblemSpec(x0=[2.0]))
    assert not a.same_problem(ProblemSpec(x0=[1.0], y0=1.0))


def test_build_grid_range_and_width():
    # 3*sqrt(10) = 9.4868..., bin width 2*3*sqrt(10)/50 = 0.3795...
    spec = ProblemSpec(horizon=10.0, x0=[0.0])
    grid = build_grid(spec, 50, 5, 5)
    assert grid.x_edges[0, 0] == pytest.approx(-9.48683298, abs=1e-6)
    assert grid.x_edges[0, -1] == pytest.approx(9.48683298, abs=1e-6)
    widths = np.diff(grid.x_edges[0])
    assert widths == pytest.approx(0.37947332, abs=1e-6)
    assert grid.x_centers.shape == (1, 50)


def test_build_grid_y_and_a_levels():
    spec = ProblemSpec(control_bound=1.0)
    grid = build_grid(spec, 4, 2, 3)
    assert np.array_equal(grid.y_levels, [0.0, 1.0])
    assert np.array_equal(grid.a_levels, [0.0, 0.5, 1.0])


def test_build_grid_symmetric_about_x0():
    spec = ProblemSpec(dims=2, x0=[1.5, -4.0], horizon=7.0)
    grid = build_grid(spec, 17, 5, 5)
    for d in range(2):
        lo, hi = grid.x_edges[d, 0], grid.x_edges[d, -1]
        assert lo + hi == pytest.approx(2 * spec.x0[d], abs=1e-12)
        mirrored = 2 * spec.x0[d] - grid.x_centers[d][::-1]
        assert grid.x_centers[d] == pytest.approx(mirrored, abs=1e-9)


def test_build_grid_rejects_small_counts():
    spec = ProblemSpec()
    for bad in [(1, 5, 5), (5, 1, 5), (5, 5, 1), (0, 5, 5)]:
        with pytest.raises(ValueError):
            build_grid(spec, *bad)


def test_stage_cost_examples():
    assert stage_cost([0.0], [0.0], 0.1) == 0.0
    assert stage_cost([5.0], [1.0], 0.1) == pytest.approx(2.6)
    assert stage_cost([3.0, 4.0], [0.0, 0.0], 0.1) == pytest.approx(2.5)


def test_stage_cost_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        stage_cost([1.0], [1.0], 0.0)


@given(
    x=st.lists(st.floats(-50, 50), min_size=1, max_size=4),
    u=st.lists(st.floats(-5, 5), min_size=1, max_size=4),
    delta=st.floats(0.01, 2.0),
)
def test_stage_cost_sign_flip_invariant(x, u, delta):
    u = u[: len(x)] + [0.0] * max(0, len(x) - len(u))
    flips = np.where(np.arange(len(x)) % 2 == 0, -1.0, 1.0)
    base = stage_cost(x, u, delta)
    assert stage_cost(np.asarray(x) * flips, u, delta) == pytest.approx(base)
    assert stage_cost(x, np.asarray(u) * flips, delta) == pytest.approx(base)


def test_nearest_index_tie_goes_lower():
    levels = np.array([0.0, 1.0, 2.0, 3.0])
    assert nearest_index(0.5, levels) == 0
    assert nearest_index(1.5, levels) == 1
    assert nearest_index(1.4999999, levels) == 1
    assert nearest_index(1.5000001, levels) == 2
    assert nearest_index(-10.0, levels) == 0
    assert nearest_index(10.0, levels) == 3


def test_grid_roundtrip_flatten():
    spec = ProblemSpec(dims=3, x0=[0.0, 1.0, -1.0])
    grid = build_grid(spec, 4, 3, 3)
    for flat in range(grid.n_cells):
        assert grid.flat_cell(grid.unflatten_cell(flat)) == flat


def test_random_stream_reproducible_and_independent():
    a = RandomStream(seed=42, stream_id=3).generator().standard_normal(8)
    b = RandomStream(seed=42, stream_id=3).generator().standard_normal(8)
    c = RandomStream(seed=42, stream_id=4).generator().standard_normal(8)
    d = RandomStream(seed=43, stream_id=3).generator().standard_normal(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_random_stream_rejects_negative():
    with pytest.raises(ValueError):
        RandomStream(seed=-1)


def test_simulation_record_recompute_matches():
    times = np.linspace(0.0, 1.0, 6)
    states = np.arange(6, dtype=float)[:, None]
    controls = np.ones((5, 1))
    total = sum(stage_cost(states[k], controls[k], 0.2) for k in range(5))
    rec = SimulationRecord(times=times, states=states, beliefs=np.full(6, 0.5),
                           controls=controls, total_cost=total,
                           true_model=ModelId.MODEL1)
    assert rec.recompute_cost() == total


def test_model_id_has_two_variants():
    assert {m.name for m in ModelId} == {"MODEL1", "MODEL2"}
