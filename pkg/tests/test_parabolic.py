"""Implicit stepping: dense linear oracle, orderings, Lipschitz reports.

The p = 2 heat-step oracle assembles the same stencil as a dense linear
system and solves it with numpy.linalg.solve, independently of the
sweep kernels.
"""

import numpy as np
import pytest

from plaplab.elliptic import EllipticProblem, SolverConfig, solve_obstacle
from plaplab.errors import ConfigurationError
from plaplab.mesh import Domain, ScalarField, build_grid
from plaplab.parabolic import (
    ParabolicProblem,
    TimeGrid,
    solve_parabolic,
    step_energy,
    step_implicit,
    time_lipschitz_constant,
)

TIGHT = SolverConfig(outer_tol=1e-10, node_tol=1e-13, omega=1.7)


def dense_heat_step_1d(uprev, g0, g1, h, dt):
    """Backward Euler for u_t = (u')' via a dense tridiagonal solve."""
    n = uprev.shape[0]
    m = n - 2
    A = np.zeros((m, m))
    b = np.zeros(m)
    for k in range(m):
        w = h
        A[k, k] = w / dt + 2.0 / h
        if k > 0:
            A[k, k - 1] = -1.0 / h
        if k < m - 1:
            A[k, k + 1] = -1.0 / h
        b[k] = w / dt * uprev[k + 1]
    b[0] += g0 / h
    b[-1] += g1 / h
    out = np.empty(n)
    out[0], out[-1] = g0, g1
    out[1:-1] = np.linalg.solve(A, b)
    return out


def dense_heat_step_2d(uprev, g, spacing, dt):
    """Backward Euler on the 5-point cross stencil, dense solve."""
    hx, hy = spacing
    cx, cy = hy / hx, hx / hy
    diag = 2.0 * (cx + cy)
    nx, ny = uprev.shape
    idx = -np.ones((nx, ny), dtype=int)
    interior = [(i, j) for i in range(1, nx - 1) for j in range(1, ny - 1)]
    for k, (i, j) in enumerate(interior):
        idx[i, j] = k
    m = len(interior)
    A = np.zeros((m, m))
    b = np.zeros(m)
    out = g.copy()
    for k, (i, j) in enumerate(interior):
        w = hx * hy
        A[k, k] = w / dt + diag
        b[k] = w / dt * uprev[i, j]
        for di, dj, c in ((1, 0, cx), (-1, 0, cx), (0, 1, cy), (0, -1, cy)):
            ii, jj = i + di, j + dj
            if idx[ii, jj] >= 0:
                A[k, idx[ii, jj]] = -c
            else:
                b[k] += c * g[ii, jj]
    sol = np.linalg.solve(A, b)
    for k, (i, j) in enumerate(interior):
        out[i, j] = sol[k]
    return out


class TestTimeGrid:
    def test_times_and_horizon(self):
        tg = TimeGrid(dt=0.25, steps=4, t0=1.0)
        np.testing.assert_allclose(tg.times, [1.0, 1.25, 1.5, 1.75, 2.0])
        assert tg.horizon == pytest.approx(1.0)

    def test_rejects_bad_dt(self):
        with pytest.raises(ConfigurationError):
            TimeGrid(dt=0.0, steps=3)

    def test_rejects_no_steps(self):
        with pytest.raises(ConfigurationError):
            TimeGrid(dt=0.1, steps=0)


class TestHeatStepOracle:
    def test_1d_matches_dense_solve(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (41,))
        x = grid.axis(0)
        uprev = ScalarField(grid, np.sin(np.pi * x))
        prob = ParabolicProblem(
            grid,
            2.0,
            None,
            lambda t: ScalarField.constant(grid, 0.0),
            uprev,
        )
        step = step_implicit(uprev, 0.01, 0.01, prob, TIGHT)
        assert step.converged
        want = dense_heat_step_1d(uprev.values, 0.0, 0.0, grid.spacing[0], 0.01)
        assert float(np.max(np.abs(step.u.values - want))) <= 1e-9

    def test_2d_matches_dense_solve(self):
        grid = build_grid(Domain((0.0, 0.0), (1.0, 2.0)), (9, 11))
        X, Y = grid.meshgrid()
        uprev = ScalarField(grid, X * (1 - X) * Y * (2 - Y))
        prob = ParabolicProblem(
            grid,
            2.0,
            None,
            lambda t: ScalarField.constant(grid, 0.0),
            uprev,
        )
        step = step_implicit(uprev, 0.05, 0.05, prob, TIGHT)
        assert step.converged
        want = dense_heat_step_2d(
            uprev.values, np.zeros(grid.shape), grid.spacing, 0.05
        )
        assert float(np.max(np.abs(step.u.values - want))) <= 1e-9

    def test_step_decreases_objective_for_static_data(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (33,))
        x = grid.axis(0)
        uprev = ScalarField(grid, np.sin(np.pi * x) ** 2)
        prob = ParabolicProblem(
            grid,
            2.4,
            lambda t: ScalarField.constant(grid, 0.0),
            lambda t: ScalarField.constant(grid, 0.0),
            uprev,
        )
        step = step_implicit(uprev, 0.02, 0.02, prob, TIGHT)
        assert step_energy(step.u, uprev, 0.02, 2.4) <= step_energy(
            uprev, uprev, 0.02, 2.4
        ) + 1e-12


def dome_initial(grid, p=2.5):
    X, Y = grid.meshgrid()
    phi = ScalarField(grid, 0.5 - (X**2 + Y**2))
    bd = ScalarField.constant(grid, 0.6)
    rhs = ScalarField.constant(grid, 0.0)
    prob = EllipticProblem(grid, p, phi, bd, rhs=rhs)
    return phi, solve_obstacle(prob, SolverConfig(outer_tol=1e-11)).u


class TestMarch:
    def test_stationary_solution_is_fixed_point(self):
        grid = build_grid(Domain((-1.0, -1.0), (1.0, 1.0)), (17, 17))
        p = 2.5
        phi, u0 = dome_initial(grid, p)
        prob = ParabolicProblem(
            grid,
            p,
            lambda t: phi,
            lambda t: ScalarField.constant(grid, 0.6),
            u0,
        )
        sol = solve_parabolic(prob, TimeGrid(dt=0.1, steps=3), TIGHT)
        assert sol.converged
        drift = float(np.max(np.abs(sol.slices[-1].values - u0.values)))
        assert drift <= 1e-7

    def test_initial_comparison_preserved(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (41,))
        x = grid.axis(0)
        lo = ScalarField(grid, 0.4 * np.sin(np.pi * x))
        hi = ScalarField(grid, 0.4 * np.sin(np.pi * x) + 0.2 * x * (1 - x))
        tg = TimeGrid(dt=0.01, steps=5)

        def march(init):
            prob = ParabolicProblem(
                grid, 3.0, None, lambda t: ScalarField.constant(grid, 0.0), init
            )
            return solve_parabolic(prob, tg, TIGHT)

        sa, sb = march(lo), march(hi)
        assert sa.converged and sb.converged
        for a, b in zip(sa.slices, sb.slices):
            assert np.all(b.values >= a.values - 1e-9)

    def test_translation_invariance(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (33,))
        x = grid.axis(0)
        shift = 0.7
        base = ScalarField(grid, np.sin(np.pi * x))
        tg = TimeGrid(dt=0.02, steps=4)

        def march(c):
            prob = ParabolicProblem(
                grid,
                2.7,
                lambda t: ScalarField.constant(grid, -0.2 + c),
                lambda t: ScalarField.constant(grid, c),
                ScalarField(grid, base.values + c),
            )
            return solve_parabolic(prob, tg, TIGHT)

        sa, sb = march(0.0), march(shift)
        for a, b in zip(sa.slices, sb.slices):
            assert float(np.max(np.abs(b.values - a.values - shift))) <= 1e-9

    def test_rising_obstacle_pushes_solution_up(self):
        grid = build_grid(Domain((-1.0, -1.0), (1.0, 1.0)), (17, 17))
        X, Y = grid.meshgrid()
        bump = 0.4 - (X**2 + Y**2)

        def phi(t):
            return ScalarField(grid, bump + 0.2 * t)

        prob = ParabolicProblem(
            grid,
            2.0,
            phi,
            lambda t: ScalarField.constant(grid, 0.5),
            ScalarField.constant(grid, 0.5),
        )
        sol = solve_parabolic(prob, TimeGrid(dt=0.25, steps=4), TIGHT)
        assert sol.converged
        for k, (sl, tk) in enumerate(zip(sol.slices, prob and sol.timegrid.times)):
            assert np.all(sl.values >= prob.obstacle_values(float(tk)) - 1e-12)
        assert sol.actives[-1].count > 0

    def test_failure_reported_not_raised(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (65,))
        x = grid.axis(0)
        prob = ParabolicProblem(
            grid,
            3.0,
            None,
            lambda t: ScalarField.constant(grid, 0.0),
            ScalarField(grid, np.sin(np.pi * x)),
        )
        sol = solve_parabolic(prob, TimeGrid(dt=0.01, steps=4), SolverConfig(max_sweeps=2))
        assert not sol.converged
        assert sol.failure_index == 1
        assert len(sol.slices) == 2


class TestValidation:
    def test_initial_below_obstacle_rejected(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (9,))
        with pytest.raises(ConfigurationError):
            ParabolicProblem(
                grid,
                2.0,
                lambda t: ScalarField.constant(grid, 1.0),
                lambda t: ScalarField.constant(grid, 1.0),
                ScalarField.constant(grid, 0.0),
            )

    def test_lateral_datum_below_obstacle_rejected_at_step(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (9,))
        prob = ParabolicProblem(
            grid,
            2.0,
            lambda t: ScalarField.constant(grid, min(t, 0.5)),
            lambda t: ScalarField.constant(grid, 0.2),
            ScalarField.constant(grid, 0.2),
        )
        with pytest.raises(ConfigurationError) as e:
            solve_parabolic(prob, TimeGrid(dt=1.0, steps=1))
        assert "t=" in str(e.value)

    def test_bad_exponent_rejected(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (9,))
        with pytest.raises(ConfigurationError):
            ParabolicProblem(
                grid,
                1.0,
                None,
                lambda t: ScalarField.constant(grid, 0.0),
                ScalarField.constant(grid, 0.0),
            )


class TestLipschitzReport:
    def test_stationary_run_measures_zero(self):
        grid = build_grid(Domain((-1.0, -1.0), (1.0, 1.0)), (17, 17))
        p = 2.0
        phi, u0 = dome_initial(grid, p)
        prob = ParabolicProblem(
            grid, p, lambda t: phi, lambda t: ScalarField.constant(grid, 0.6), u0
        )
        sol = solve_parabolic(prob, TimeGrid(dt=0.1, steps=3), TIGHT)
        rep = time_lipschitz_constant(sol)
        assert rep.passed
        assert rep.measured <= 1e-6
        assert rep.obstacle_slope == 0.0
        assert rep.datum_slope == 0.0

    def test_moving_datum_bound_controls_slope(self):
        grid = build_grid(Domain((0.0,), (1.0,)), (33,))
        x = grid.axis(0)

        def g(t):
            return ScalarField(grid, np.full(33, 0.3 * t))

        prob = ParabolicProblem(grid, 2.0, None, g, ScalarField(grid, 0.0 * x))
        sol = solve_parabolic(prob, TimeGrid(dt=0.05, steps=8), TIGHT)
        rep = time_lipschitz_constant(sol)
        assert rep.passed
        assert rep.datum_slope == pytest.approx(0.3, rel=1e-9)
        assert rep.measured <= (1 + rep.tol) * rep.bound
