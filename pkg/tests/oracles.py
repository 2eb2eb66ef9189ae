"""Independent reference computations shared by the test modules.

These deliberately avoid the library's own solution paths: the enumeration
oracle recurses over actions and successors with no value table, and the
gradient check differentiates the swept objective numerically.
"""

import numpy as np

from dualcontrol.pmp import ControlProfile, profile_objective
from dualcontrol.surrogate import SurrogateState


def enum_value(transitions, x_flat, y_idx, t):
    """Optimal cost-to-go by plain recursion over the same transition model."""
    grid = transitions.grid
    spec = transitions.spec
    if t == spec.steps:
        return 0.0
    delta = spec.delta
    cell = grid.unflatten_cell(x_flat)
    xsq = sum(grid.x_centers[d, cell[d]] ** 2 for d in range(grid.dims))
    best = np.inf
    for m, a in enumerate(grid.a_levels):
        stage = delta * (a * a + xsq)
        block = transitions.block(y_idx, m)
        lo, hi = block.indptr[x_flat], block.indptr[x_flat + 1]
        expected = 0.0
        for col, p in zip(block.indices[lo:hi], block.data[lo:hi]):
            nxt_cell, nxt_y = divmod(int(col), grid.n_y)
            expected += p * enum_value(transitions, nxt_cell, nxt_y, t + 1)
        best = min(best, stage + expected)
    return best


def assert_gradient_consistent(prof, x0, y0, rel_tol=1e-2, zero_floor=1e-3):
    """Finite-difference objective changes must match the Hamiltonian's
    control derivative integrated over each interior grid cell."""
    from dualcontrol.pmp import _backward_kernel, _forward_kernel

    init = SurrogateState(z=np.atleast_1d(abs(x0)), y1=y0, y2=y0, y0_anchor=y0)
    m = prof.n_points
    h = 1e-4
    n_sub = 10
    z, y1, y2 = _forward_kernel(init.z, y0, y0, y0, prof.values, prof.cell_dt,
                                n_sub, 1e-3)
    lz, l1, l2 = _backward_kernel(prof.values, prof.cell_dt, n_sub, 1e-3,
                                  z, y1, y2, y0)
    times = np.linspace(0.0, prof.horizon, m * n_sub + 1)
    for j in range(1, m - 1):
        up = prof.values.copy()
        dn = prof.values.copy()
        up[j, 0] += h
        dn[j, 0] -= h
        jp = profile_objective(init, ControlProfile(horizon=prof.horizon, values=up))
        jm = profile_objective(init, ControlProfile(horizon=prof.horizon, values=dn))
        fd = (jp - jm) / (2 * h)
        sl = slice(j * n_sub, j * n_sub + n_sub + 1)
        w = y0 * np.abs(2 * y1[sl] - 1) + (1 - y0) * np.abs(2 * y2[sl] - 1)
        a = (1 + 4 * l1[sl] * y1[sl] * (1 - y1[sl]) ** 2
             - 4 * l2[sl] * y2[sl] ** 2 * (1 - y2[sl]))
        dhdu = 2 * a * prof.values[j, 0] - lz[sl, 0] * w
        integ = np.trapezoid(dhdu, times[sl])
        scale = max(abs(fd), abs(integ))
        if scale < zero_floor:
            continue  # stationary interior cell: both sides effectively zero
        assert abs(fd - integ) <= rel_tol * scale, (j, fd, integ)
