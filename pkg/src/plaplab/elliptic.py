"""Obstacle-constrained minimization of the p-Dirichlet energy.

solve_obstacle finds the unique minimizer of

    E(v) = sum_T |grad v|^p / p vol_T + sum_i f_i v_i w_i

over nodal fields with v >= phi everywhere and v = g on the boundary
nodes, by projected nonlinear Gauss-Seidel: every visit solves the
one-node problem exactly, so the energy never increases.  The outer
stop is the complementarity residual max|min(g_i, u_i - phi_i)| on
interior nodes.

node_minimize is the readable reference for the per-node solve; the
compiled kernels in sweeps.py implement the same math and are checked
against it in the test suite.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import sweeps
from .energy import EnergyParams, dirichlet_gradient, energy_gradient, total_energy
from .errors import ConfigurationError, NumericalError
from .mesh import Grid, NodeSet, ScalarField, prolong

__all__ = [
    "EllipticProblem",
    "SolverConfig",
    "EllipticSolution",
    "KktReport",
    "node_minimize",
    "solve_obstacle",
    "verify_kkt",
    "boundary_extension",
]

SWEEP_ORDERS = ("lexicographic", "red_black")
SEED_FIELDS = ("obstacle", "boundary_extension", "given")


@dataclass(frozen=True)
class SolverConfig:
    """Projected Gauss-Seidel controls.

    outer_tol None means 1e-9 * (1 + max|f| + |E(seed)|), fixed once at
    the start of the solve.  node_tol is the bracket-width target of the
    per-node scalar solve, relative to 1 + |s|.  omega over-relaxes each
    node update (projected, with an energy safeguard for p != 2), which
    keeps sweeps energy-monotone while cutting the sweep count sharply
    on fine grids.  continuation_levels above 1 first solves injected
    coarsenings of the problem (half the nodes per axis each level,
    while the counts allow it) and warm starts each finer level from
    the prolonged coarse solution; the result is identical up to the
    outer tolerance, just cheaper.
    """

    outer_tol: float | None = None
    max_sweeps: int = 50000
    node_tol: float = 1e-12
    sweep_order: str = "lexicographic"
    seed_field: str = "boundary_extension"
    omega: float = 1.0
    continuation_levels: int = 1

    def __post_init__(self):
        if self.outer_tol is not None and not self.outer_tol > 0:
            raise ConfigurationError("outer_tol must be positive or None")
        if self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be at least 1")
        if not 0 < self.omega < 2:
            raise ConfigurationError("omega must lie in (0, 2)")
        if self.continuation_levels < 1:
            raise ConfigurationError("continuation_levels must be at least 1")
        if not 0 < self.node_tol < 1e-2:
            raise ConfigurationError("node_tol must be in (0, 1e-2)")
        if self.sweep_order not in SWEEP_ORDERS:
            raise ConfigurationError(
                f"sweep_order must be one of {SWEEP_ORDERS}, got {self.sweep_order!r}"
            )
        if self.seed_field not in SEED_FIELDS:
            raise ConfigurationError(
                f"seed_field must be one of {SEED_FIELDS}, got {self.seed_field!r}"
            )


class EllipticProblem:
    """Grid, exponent, obstacle phi, load f and boundary trace g.

    Boundary data below the obstacle on a boundary node is rejected:
    no feasible field exists there.
    """

    def __init__(
        self,
        grid: Grid,
        p: float,
        obstacle: ScalarField,
        boundary: ScalarField,
        rhs: ScalarField | None = None,
    ):
        self.grid = grid
        self.params = EnergyParams(grid=grid, p=float(p), rhs=rhs)
        if obstacle.grid != grid or boundary.grid != grid:
            raise ConfigurationError("obstacle/boundary live on a different grid")
        if not np.all(np.isfinite(boundary.values)):
            raise ConfigurationError("boundary data contains non-finite values")
        bmask = grid.boundary_mask()
        bad = (boundary.values < obstacle.values) & bmask
        if np.any(bad):
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ConfigurationError(
                f"boundary data lies below the obstacle at node {node}"
            )
        self.obstacle = obstacle
        self.boundary = boundary
        self.boundary_mask = bmask

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def rhs(self) -> ScalarField | None:
        return self.params.rhs


@dataclass
class KktReport:
    feasibility_violation: float
    supersolution_violation: float
    stationarity_violation: float
    tol: float
    passed: bool


@dataclass
class EllipticSolution:
    u: ScalarField
    active: NodeSet
    sweeps_used: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    outer_tol_used: float = 0.0
    problem: EllipticProblem | None = None


def boundary_extension(grid: Grid, boundary: ScalarField) -> ScalarField:
    """Multilinear blend of the boundary trace into the box.

    1D: the chord between the endpoint values.  2D: transfinite
    interpolation of the four edges (exact for multilinear data).
    """
    g = boundary.values
    if grid.dim == 1:
        s = np.linspace(0.0, 1.0, grid.counts[0])
        vals = (1 - s) * g[0] + s * g[-1]
        return ScalarField(grid, vals)
    nx, ny = grid.counts
    s = np.linspace(0.0, 1.0, nx)[:, None]
    t = np.linspace(0.0, 1.0, ny)[None, :]
    vals = (
        (1 - s) * g[0, :][None, :]
        + s * g[-1, :][None, :]
        + (1 - t) * g[:, 0][:, None]
        + t * g[:, -1][:, None]
        - (
            (1 - s) * (1 - t) * g[0, 0]
            + s * (1 - t) * g[-1, 0]
            + (1 - s) * t * g[0, -1]
            + s * t * g[-1, -1]
        )
    )
    return ScalarField(grid, vals)


def _seed_values(problem: EllipticProblem, config: SolverConfig, seed) -> np.ndarray:
    phi = problem.obstacle.values
    if config.seed_field == "given":
        if seed is None:
            raise ConfigurationError("seed_field='given' requires a seed field")
        if seed.grid != problem.grid:
            raise ConfigurationError("seed lives on a different grid")
        u0 = np.maximum(seed.values, phi)
    elif config.seed_field == "obstacle":
        u0 = phi.copy()
    else:
        u0 = np.maximum(boundary_extension(problem.grid, problem.boundary).values, phi)
    u0 = u0.copy()
    bm = problem.boundary_mask
    u0[bm] = problem.boundary.values[bm]
    return u0


def node_minimize(u: ScalarField, index, problem: EllipticProblem, node_tol: float = 1e-12):
    """Exact minimizer of the energy in the single unknown u[index].

    Reference implementation of the per-node solve used by the sweep
    kernels.  Returns (value, bound_active): bound_active is True iff
    the unconstrained scalar minimizer lies at or below the obstacle.
    """
    grid = problem.grid
    index = tuple(int(i) for i in np.atleast_1d(index))
    for k, i in enumerate(index):
        if not 1 <= i < grid.counts[k] - 1:
            raise ConfigurationError(f"node {index} is not interior")
    f = problem.rhs.values[index] if problem.rhs is not None else 0.0
    w = grid.lumped_weights()[index]
    v = u.values
    phi_i = float(problem.obstacle.values[index])
    if grid.dim == 1:
        (i,) = index
        h = grid.spacing[0]
        ih = 1.0 / h
        gx0 = np.array([-v[i - 1] * ih, v[i + 1] * ih])
        gy0 = np.zeros(2)
        bx = np.array([ih, -ih])
        by = np.zeros(2)
        nbrs = (v[i - 1], v[i + 1])
        vol = h
        m = 2
    else:
        i, j = index
        hx, hy = grid.spacing
        ihx, ihy = 1.0 / hx, 1.0 / hy
        uw, ue = v[i - 1, j], v[i + 1, j]
        us, un = v[i, j - 1], v[i, j + 1]
        une, usw = v[i + 1, j + 1], v[i - 1, j - 1]
        gx0 = np.array(
            [ue * ihx, (une - un) * ihx, -uw * ihx, ue * ihx, (us - usw) * ihx, -uw * ihx]
        )
        gy0 = np.array(
            [(une - ue) * ihy, un * ihy, un * ihy, -us * ihy, -us * ihy, (uw - usw) * ihy]
        )
        bx = np.array([-ihx, 0.0, ihx, -ihx, 0.0, ihx])
        by = np.array([0.0, -ihy, -ihy, ihy, ihy, 0.0])
        nbrs = (uw, ue, us, un, une, usw)
        vol = 0.5 * hx * hy
        m = 6
    val, act, rc = sweeps._solve_node(
        m, gx0, gy0, bx, by, vol, f * w, 0.0, phi_i, float(v[index]),
        min(nbrs), max(nbrs), problem.p, node_tol,
    )
    if rc != 0:
        raise NumericalError(f"node solve failed at {index} (code {rc})")
    return float(val), bool(act)


def _augmented_residual(grid, p, u_vals, phi_vals, lin, quad, interior):
    """Complementarity residual of the (possibly time-augmented) energy."""
    g = dirichlet_gradient(ScalarField(grid, u_vals), p).values + lin + quad * u_vals
    gap = u_vals - phi_vals
    gap = np.where(phi_vals <= sweeps.UNCONSTRAINED, np.inf, gap)
    r = np.minimum(g, gap)[interior]
    return float(np.max(np.abs(r))) if r.size else 0.0


def _drive(grid, p, phi_vals, u0, lin, quad, config: SolverConfig, energy_scale):
    """Sweep until the complementarity residual drops under outer_tol.

    Residuals are checked on a doubling schedule (1, 2, 4, ... sweeps
    between checks, capped) and appended to the returned history.
    """
    u = u0.copy()
    active = np.zeros(grid.shape, dtype=np.int8)
    interior = ~grid.boundary_mask()
    mode = 0 if config.sweep_order == "lexicographic" else 1
    if config.outer_tol is not None:
        tol = config.outer_tol
    else:
        tol = 1e-9 * energy_scale
    history = []
    sweeps_used = 0
    converged = False
    chunk = 1
    while sweeps_used < config.max_sweeps:
        n = min(chunk, config.max_sweeps - sweeps_used)
        if grid.dim == 1:
            err, _ = sweeps.run_sweeps_1d(
                u, phi_vals, lin, quad, grid.spacing[0], p, config.node_tol,
                config.omega, mode, n, active,
            )
        else:
            err, _ = sweeps.run_sweeps_2d(
                u, phi_vals, lin, quad, grid.spacing[0], grid.spacing[1], p,
                config.node_tol, config.omega, mode, n, active,
            )
        if err != 0:
            raise NumericalError(
                "node bracket expansion failed; field values are likely corrupted"
                if err == 1
                else "non-finite value produced during sweeps"
            )
        sweeps_used += n
        res = _augmented_residual(grid, p, u, phi_vals, lin, quad, interior)
        history.append(res)
        if res <= tol:
            converged = True
            break
        chunk = min(chunk * 2, 512)
    return u, active.astype(bool) & interior, sweeps_used, history, converged, tol


def _coarsen_problem(problem: EllipticProblem) -> EllipticProblem | None:
    """Injected data on the grid with half the cells per axis, or None
    when the counts do not halve."""
    grid = problem.grid
    if any((n - 1) % 2 or n < 9 for n in grid.counts):
        return None
    cgrid = Grid(grid.domain, tuple((n - 1) // 2 + 1 for n in grid.counts))
    take = (slice(None, None, 2),) * grid.dim
    rhs = None
    if problem.rhs is not None:
        rhs = ScalarField(cgrid, problem.rhs.values[take].copy())
    return EllipticProblem(
        cgrid,
        problem.p,
        ScalarField(cgrid, problem.obstacle.values[take].copy()),
        ScalarField(cgrid, problem.boundary.values[take].copy()),
        rhs=rhs,
    )


def solve_obstacle(
    problem: EllipticProblem,
    config: SolverConfig | None = None,
    seed: ScalarField | None = None,
) -> EllipticSolution:
    """Projected Gauss-Seidel solve of the obstacle problem.

    Non-convergence within max_sweeps is reported through the converged
    flag, not an exception.
    """
    config = config or SolverConfig()
    if config.continuation_levels > 1:
        chain = [problem]
        while len(chain) < config.continuation_levels:
            coarse = _coarsen_problem(chain[-1])
            if coarse is None:
                break
            chain.append(coarse)
        if len(chain) > 1:
            inner = dataclasses.replace(config, continuation_levels=1)
            solution = solve_obstacle(chain[-1], inner, seed=seed)
            total = solution.sweeps_used
            # coarse levels only provide warm starts: a stalled one does not
            # abort the chain, and only the requested grid decides converged
            for prob in reversed(chain[:-1]):
                warm = prolong(solution.u, prob.grid)
                solution = solve_obstacle(
                    prob, dataclasses.replace(inner, seed_field="given"), seed=warm
                )
                total += solution.sweeps_used
            solution.sweeps_used = total
            return solution
    grid = problem.grid
    u0 = _seed_values(problem, config, seed)
    w = grid.lumped_weights()
    lin = problem.rhs.values * w if problem.rhs is not None else np.zeros(grid.shape)
    quad = np.zeros(grid.shape)
    fmax = float(np.max(np.abs(problem.rhs.values))) if problem.rhs is not None else 0.0
    scale = 1.0 + fmax + abs(total_energy(ScalarField(grid, u0), problem.params))
    u, active, used, history, converged, tol = _drive(
        grid, problem.p, problem.obstacle.values, u0, lin, quad, config, scale
    )
    return EllipticSolution(
        u=ScalarField(grid, u),
        active=NodeSet(grid, active),
        sweeps_used=used,
        residual_history=history,
        converged=converged,
        outer_tol_used=tol,
        problem=problem,
    )


def verify_kkt(
    solution: EllipticSolution,
    problem: EllipticProblem | None = None,
    tol: float | None = None,
) -> KktReport:
    """Independent check of the discrete first-order conditions.

    Reports max-norm violations of feasibility (u >= phi), the
    supersolution sign (g_i >= 0 on interior nodes) and stationarity
    (g_i = 0 on interior inactive nodes).
    """
    problem = problem or solution.problem
    if problem is None:
        raise ConfigurationError("verify_kkt needs the problem the solution solves")
    if tol is None:
        tol = 10.0 * solution.outer_tol_used if solution.outer_tol_used > 0 else 1e-8
    u = solution.u.values
    phi = problem.obstacle.values
    g = energy_gradient(solution.u, problem.params).values
    interior = ~problem.boundary_mask
    feas = float(max(0.0, np.max(phi - u)))
    supe = float(max(0.0, np.max(-g[interior]))) if interior.any() else 0.0
    inactive = interior & ~solution.active.mask
    stat = float(np.max(np.abs(g[inactive]))) if inactive.any() else 0.0
    return KktReport(
        feasibility_violation=feas,
        supersolution_violation=supe,
        stationarity_violation=stat,
        tol=tol,
        passed=bool(feas <= tol and supe <= tol and stat <= tol),
    )
