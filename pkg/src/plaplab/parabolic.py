"""Implicit time stepping for the parabolic obstacle problem.

Each backward Euler step minimizes

    F(v) = sum_T |grad v|^p / p vol_T + sum_i w_i (v_i^2 / (2 dt) - uprev_i v_i / dt)

over v >= phi(., t_next) with v equal to the lateral datum at t_next on
the boundary: data are sampled fully implicitly.  The step reuses the
projected Gauss-Seidel engine with the extra per-node quadratic term.

time_lipschitz_constant reports the largest discrete time slope of the
computed solution next to the bound N built from the data (obstacle and
lateral-datum time slopes sampled on the time grid, and the discrete
p-Laplacian of the initial datum), which controls |u_t| for compatible
data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sweeps
from .elliptic import SolverConfig, _drive
from .energy import dirichlet_energy, discrete_p_laplacian
from .errors import ConfigurationError
from .mesh import Grid, NodeSet, ScalarField

__all__ = [
    "TimeGrid",
    "ParabolicProblem",
    "StepResult",
    "ParabolicSolution",
    "LipschitzReport",
    "step_implicit",
    "solve_parabolic",
    "time_lipschitz_constant",
    "step_energy",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform times t0 + k dt, k = 0..steps."""

    dt: float
    steps: int
    t0: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ConfigurationError("need at least one time step")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    @property
    def horizon(self) -> float:
        return self.dt * self.steps


class ParabolicProblem:
    """Time-dependent data for the implicit scheme.

    obstacle: callable t -> ScalarField, or None for no constraint.
    boundary: callable t -> ScalarField; only boundary nodes are read.
    initial:  ScalarField at t0, must sit above obstacle(t0).
    """

    def __init__(self, grid: Grid, p: float, obstacle, boundary, initial: ScalarField, t0: float = 0.0):
        if not (p > 1.0 and np.isfinite(p)):
            raise ConfigurationError(f"exponent p must satisfy 1 < p < inf, got {p}")
        if initial.grid != grid:
            raise ConfigurationError("initial datum lives on a different grid")
        self.grid = grid
        self.p = float(p)
        self.obstacle = obstacle
        self.boundary = boundary
        self.initial = initial
        self.t0 = float(t0)
        phi0 = self.obstacle_values(t0)
        slack = 1e-12 * (1.0 + float(np.max(np.abs(initial.values))))
        if np.any(initial.values < phi0 - slack):
            node = tuple(
                int(i) for i in np.argwhere(initial.values < phi0 - slack)[0]
            )
            raise ConfigurationError(
                f"initial datum lies below the obstacle at node {node}"
            )

    def obstacle_values(self, t: float) -> np.ndarray:
        if self.obstacle is None:
            return np.full(self.grid.shape, sweeps.UNCONSTRAINED)
        phi = self.obstacle(t)
        if phi.grid != self.grid:
            raise ConfigurationError("obstacle field lives on a different grid")
        return phi.values

    def boundary_values(self, t: float) -> np.ndarray:
        g = self.boundary(t)
        if g.grid != self.grid:
            raise ConfigurationError("boundary field lives on a different grid")
        return g.values


@dataclass
class StepResult:
    u: ScalarField
    active: NodeSet
    residual: float
    sweeps_used: int
    converged: bool


@dataclass
class ParabolicSolution:
    """Computed slices u^0..u^K; failure_index marks the first step whose
    inner solve did not converge (slices stop there)."""

    slices: list
    actives: list
    residuals: list
    converged: bool
    failure_index: int | None
    problem: ParabolicProblem
    timegrid: TimeGrid
    sweeps_total: int = 0


@dataclass
class LipschitzReport:
    measured: float
    bound: float
    margin: float
    obstacle_slope: float
    datum_slope: float
    initial_plaplacian: float
    tol: float
    passed: bool


def step_energy(v: ScalarField, u_prev: ScalarField, dt: float, p: float) -> float:
    """The backward Euler step objective (used for monotonicity tests)."""
    w = v.grid.lumped_weights()
    quad = float(np.sum(w * v.values * v.values)) / (2.0 * dt)
    lin = -float(np.sum(w * u_prev.values * v.values)) / dt
    return dirichlet_energy(v, p) + quad + lin


def step_implicit(
    u_prev: ScalarField,
    t_next: float,
    dt: float,
    problem: ParabolicProblem,
    config: SolverConfig | None = None,
) -> StepResult:
    """One fully implicit step from u_prev to time t_next."""
    config = config or SolverConfig()
    grid = problem.grid
    phi = problem.obstacle_values(t_next)
    g = problem.boundary_values(t_next)
    bmask = grid.boundary_mask()
    bad = (g < phi) & bmask
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ConfigurationError(
            f"lateral datum lies below the obstacle at node {node}, t={t_next}"
        )
    w = grid.lumped_weights()
    quad = w / dt
    lin = -w * u_prev.values / dt
    u0 = np.maximum(u_prev.values, phi)
    u0[bmask] = g[bmask]
    feff = float(np.max(np.abs(u_prev.values))) / dt
    scale = 1.0 + feff + abs(
        step_energy(ScalarField(grid, u0), u_prev, dt, problem.p)
    )
    u, active, used, history, converged, _ = _drive(
        grid, problem.p, phi, u0, lin, quad, config, scale
    )
    return StepResult(
        u=ScalarField(grid, u),
        active=NodeSet(grid, active),
        residual=history[-1] if history else 0.0,
        sweeps_used=used,
        converged=converged,
    )


def solve_parabolic(
    problem: ParabolicProblem,
    timegrid: TimeGrid,
    config: SolverConfig | None = None,
) -> ParabolicSolution:
    """March the implicit scheme over the whole time grid.

    Each step is warm-started from the previous slice.  A step that
    fails to converge stops the march; the partial solution is returned
    with failure_index set, never an exception.
    """
    config = config or SolverConfig()
    grid = problem.grid
    times = timegrid.times
    u0 = problem.initial.values.copy()
    bmask = grid.boundary_mask()
    u0[bmask] = problem.boundary_values(times[0])[bmask]
    u0 = np.maximum(u0, problem.obstacle_values(times[0]))
    slices = [ScalarField(grid, u0)]
    actives = [NodeSet(grid, np.zeros(grid.shape, dtype=bool))]
    residuals = [0.0]
    sweeps_total = 0
    failure_index = None
    for k in range(timegrid.steps):
        step = step_implicit(slices[-1], float(times[k + 1]), timegrid.dt, problem, config)
        slices.append(step.u)
        actives.append(step.active)
        residuals.append(step.residual)
        sweeps_total += step.sweeps_used
        if not step.converged:
            failure_index = k + 1
            break
    return ParabolicSolution(
        slices=slices,
        actives=actives,
        residuals=residuals,
        converged=failure_index is None,
        failure_index=failure_index,
        problem=problem,
        timegrid=timegrid,
        sweeps_total=sweeps_total,
    )


def time_lipschitz_constant(
    solution: ParabolicSolution,
    timegrid: TimeGrid | None = None,
    tol: float = 0.05,
) -> LipschitzReport:
    """Largest discrete |u_t| of the computed slices next to the data bound.

    bound = max( max_k |phi(t_{k+1}) - phi(t_k)| / dt,
                 max_k |g(t_{k+1}) - g(t_k)| / dt on boundary nodes,
                 max interior |discrete p-Laplacian of the initial slice| ).
    """
    timegrid = timegrid or solution.timegrid
    problem = solution.problem
    dt = timegrid.dt
    times = timegrid.times[: len(solution.slices)]
    measured = 0.0
    for a, b in zip(solution.slices[:-1], solution.slices[1:]):
        measured = max(measured, float(np.max(np.abs(b.values - a.values))) / dt)
    phi_slope = 0.0
    if problem.obstacle is not None:
        for ta, tb in zip(times[:-1], times[1:]):
            dphi = problem.obstacle_values(float(tb)) - problem.obstacle_values(float(ta))
            phi_slope = max(phi_slope, float(np.max(np.abs(dphi))) / dt)
    bmask = problem.grid.boundary_mask()
    datum_slope = 0.0
    for ta, tb in zip(times[:-1], times[1:]):
        dg = problem.boundary_values(float(tb)) - problem.boundary_values(float(ta))
        datum_slope = max(datum_slope, float(np.max(np.abs(dg[bmask]))) / dt)
    dpl = discrete_p_laplacian(solution.slices[0], problem.p).values
    interior = ~bmask
    dpl_initial = float(np.max(np.abs(dpl[interior])))
    bound = max(phi_slope, datum_slope, dpl_initial)
    return LipschitzReport(
        measured=measured,
        bound=bound,
        margin=(1.0 + tol) * bound - measured,
        obstacle_slope=phi_slope,
        datum_slope=datum_slope,
        initial_plaplacian=dpl_initial,
        tol=tol,
        passed=bool(measured <= (1.0 + tol) * bound),
    )
