"""Contact sets, free boundaries and growth measurements.

The quantities measured here are the discrete counterparts of the
detachment estimates the solver laboratory is built to exercise: local
suprema of u minus its tangent plane on dyadic balls around a free
boundary node, shell profiles of u - phi (non-degeneracy), cell-counting
density of the free boundary (porosity) and rescaled local fields
(blow-ups), plus the space-time variant over backward cylinders.

Measurement hygiene is enforced throughout: fitted radii sit at or
above 8 h, balls stay inside the box, and measurement centers keep a
margin of a quarter of the shortest box side from the boundary
(override via the margin parameters where a config knows better).
The tangent-plane gradient at a free boundary node is taken from the
obstacle when an analytic gradient is available, since u and the
obstacle share first-order behavior there; the fallback is centered
differencing of u itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import EllipticSolution
from .errors import MeasurementError, PreconditionError
from .mesh import (
    Domain,
    Grid,
    NodeSet,
    ScalarField,
    build_grid,
    gradient_at,
    interpolate,
    nodes_in_ball,
    nodes_on_shell,
)

__all__ = [
    "GrowthFit",
    "LineFit",
    "NondegReport",
    "PorosityReport",
    "BlowupField",
    "GRADIENT_SOURCES",
    "contact_set",
    "contact_set_thresholded",
    "free_boundary",
    "free_boundary_of",
    "snap_to_nodeset",
    "tangent_gradient",
    "dyadic_radii",
    "growth_sup",
    "measure_growth",
    "fit_exponent",
    "nondegeneracy_profile",
    "porosity_density",
    "porosity_profile",
    "blowup_rescale",
    "parabolic_growth_sup",
    "measure_parabolic_growth",
]

RADIUS_FLOOR_FACTOR = 8.0  # smallest trustworthy radius, in units of h
CENTER_MARGIN = 0.25  # of the shortest box side

GRADIENT_SOURCES = ("analytic_obstacle", "numeric")


@dataclass
class LineFit:
    """Least-squares line through (log r, log S)."""

    slope: float
    intercept: float
    rss: float
    radii: list
    sups: list
    dropped_zero: int


@dataclass
class GrowthFit:
    """A complete growth measurement at one anchor node.

    radii are strictly decreasing dyadic values; sups are the matching
    tangent-plane suprema S(r); expected_exponent is what the fitted
    slope is compared against downstream (1 + alpha for elliptic runs,
    p/(p-1) for parabolic cylinders).
    """

    center: tuple
    radii: list
    sups: list
    fitted_slope: float
    fitted_intercept: float
    expected_exponent: float
    alpha_used: float
    rss: float
    dropped_zero: int = 0


@dataclass
class NondegReport:
    center: tuple
    radii: list
    shell_sups: list
    ball_sups: list
    ratios: list
    min_ratio: float
    max_ratio: float
    epsilon_measured: float
    degenerate: list
    shell_half_width: float


@dataclass
class PorosityReport:
    points: list
    radii: list
    densities: list  # one row per point, one column per radius
    max_density: float
    delta_measured: float


@dataclass
class BlowupField:
    """(u(y + r x) - u(y)) / r^(1+alpha) on a fixed reference grid."""

    grid: Grid
    u: ScalarField
    obstacle: ScalarField | None
    rhs: ScalarField | None
    center: np.ndarray
    r: float
    alpha: float

    def sup_half_ball(self) -> float:
        d2 = np.zeros(self.grid.shape)
        for xk in self.grid.meshgrid():
            d2 += xk**2
        inside = d2 <= 0.25
        return float(np.max(np.abs(self.u.values[inside])))


def contact_set(solution: EllipticSolution) -> NodeSet:
    """Interior nodes the solver classified as pressed onto the obstacle."""
    return solution.active


def contact_set_thresholded(solution: EllipticSolution, factor: float = 10.0):
    """Cross-check variant: u - obstacle <= factor * outer_tol, interior only.

    Returns (NodeSet, symmetric difference count vs the solver's set).
    """
    problem = solution.problem
    if problem is None:
        raise MeasurementError("solution carries no problem reference")
    gap = solution.u.values - problem.obstacle.values
    interior = ~problem.boundary_mask
    tol = factor * (solution.outer_tol_used if solution.outer_tol_used > 0 else 1e-9)
    mask = (gap <= tol) & interior
    sym = int(np.sum(mask ^ solution.active.mask))
    return NodeSet(solution.u.grid, mask), sym


def free_boundary_of(active: NodeSet) -> NodeSet:
    """Active nodes with at least one inactive interior grid neighbor.

    Neighbors are the axis neighbors (4 in 2D, 2 in 1D).  Boundary
    nodes neither belong to the set nor witness detachment, so contact
    regions running into the box wall do not produce members there.
    """
    grid = active.grid
    mask = active.mask
    interior = ~grid.boundary_mask()
    inactive = interior & ~mask
    witness = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        for shift in (1, -1):
            witness |= np.roll(inactive, shift, axis=axis)
    # np.roll wraps around, but wrapped witnesses land on boundary
    # nodes, which are never active, so they cannot create members
    return NodeSet(grid, mask & witness)


def free_boundary(solution: EllipticSolution) -> NodeSet:
    """Free boundary of a computed elliptic solution."""
    return free_boundary_of(solution.active)


def snap_to_nodeset(nodeset: NodeSet, point) -> tuple:
    """Index of the nodeset member nearest to the given point."""
    if nodeset.count == 0:
        raise MeasurementError("cannot snap to an empty node set")
    point = np.atleast_1d(np.asarray(point, dtype=float))
    coords = nodeset.coordinates()
    d2 = np.sum((coords - point[None, :]) ** 2, axis=1)
    idx = nodeset.indices()[int(np.argmin(d2))]
    return tuple(int(i) for i in idx)


def _as_index(grid: Grid, y_index) -> tuple:
    idx = tuple(int(i) for i in np.atleast_1d(y_index))
    if len(idx) != grid.dim:
        raise MeasurementError(f"index {idx} does not match grid dimension {grid.dim}")
    return idx


def _check_center_margin(grid: Grid, center, margin_factor: float):
    side = min(b - a for a, b in zip(grid.domain.lo, grid.domain.hi))
    need = margin_factor * side
    for k in range(grid.dim):
        dist = min(center[k] - grid.domain.lo[k], grid.domain.hi[k] - center[k])
        if dist < need - 1e-12:
            raise MeasurementError(
                f"measurement center {tuple(center)} is {dist:.4g} from the "
                f"boundary on axis {k}; need {need:.4g}"
            )


def _check_ball(grid: Grid, center, r: float, min_factor: float = RADIUS_FLOOR_FACTOR):
    if r < min_factor * grid.hmax - 1e-12:
        raise MeasurementError(
            f"radius {r:.4g} is below the resolution floor "
            f"{min_factor:g} h = {min_factor * grid.hmax:.4g}"
        )
    for k in range(grid.dim):
        if center[k] - r < grid.domain.lo[k] - 1e-12 or center[k] + r > grid.domain.hi[k] + 1e-12:
            raise MeasurementError(
                f"ball of radius {r:.4g} around {tuple(center)} leaves the box"
            )


def tangent_gradient(
    u: ScalarField,
    y_index,
    gradient_source: str = "numeric",
    analytic_gradient=None,
) -> np.ndarray:
    """Gradient of the tangent plane at a node.

    "analytic_obstacle" evaluates the supplied callable at the node
    coordinates (the obstacle's exact gradient, which matches the
    solution's at free boundary points); "numeric" falls back to
    centered differencing of u.
    """
    if gradient_source not in GRADIENT_SOURCES:
        raise MeasurementError(
            f"gradient_source must be one of {GRADIENT_SOURCES}, got {gradient_source!r}"
        )
    y_index = _as_index(u.grid, y_index)
    if gradient_source == "analytic_obstacle":
        if analytic_gradient is None:
            raise MeasurementError(
                "gradient_source 'analytic_obstacle' needs an analytic_gradient callable"
            )
        y = u.grid.node_coords(y_index)
        g = np.atleast_1d(np.asarray(analytic_gradient(*y), dtype=float))
        if g.shape != (u.grid.dim,):
            raise MeasurementError(
                f"analytic gradient returned shape {g.shape}, expected ({u.grid.dim},)"
            )
        return g
    grad, _ = gradient_at(u, y_index)
    return grad


def dyadic_radii(grid: Grid, r_max: float, count: int) -> list:
    """Strictly decreasing radii r_max * 2^-k, all at or above 8 h."""
    if count < 1:
        raise MeasurementError("need at least one radius")
    radii = [r_max * 2.0**-k for k in range(count)]
    floor = RADIUS_FLOOR_FACTOR * grid.hmax
    if radii[-1] < floor - 1e-12:
        raise MeasurementError(
            f"smallest dyadic radius {radii[-1]:.4g} falls below the resolution "
            f"floor 8 h = {floor:.4g}; reduce the radius count or refine the grid"
        )
    return radii


def growth_sup(
    u: ScalarField,
    y_index,
    r: float,
    gradient_source: str = "numeric",
    analytic_gradient=None,
    margin_factor: float = CENTER_MARGIN,
) -> float:
    """sup over nodes in the closed r-ball of |u(x) - u(y) - (x-y).grad|."""
    grid = u.grid
    y_index = _as_index(grid, y_index)
    y = grid.node_coords(y_index)
    _check_center_margin(grid, y, margin_factor)
    _check_ball(grid, y, r)
    grad = tangent_gradient(u, y_index, gradient_source, analytic_gradient)
    ball = nodes_in_ball(grid, y, r)
    coords = ball.coordinates()
    vals = u.values[ball.mask]
    plane = float(u.values[y_index]) + (coords - y[None, :]) @ grad
    return float(np.max(np.abs(vals - plane)))


def fit_exponent(radii, sups) -> LineFit:
    """Least-squares slope and intercept through (log r, log S).

    Radii with S = 0 are dropped and counted; at least four surviving
    points are required.
    """
    radii = [float(r) for r in radii]
    sups = [float(s) for s in sups]
    if len(radii) != len(sups):
        raise MeasurementError("radii and sups must have equal length")
    pairs = [(r, s) for r, s in zip(radii, sups) if s > 0.0]
    dropped = len(radii) - len(pairs)
    if len(pairs) < 4:
        raise MeasurementError(
            f"need at least 4 nonzero suprema for a fit, have {len(pairs)}"
        )
    lr = np.log([q[0] for q in pairs])
    ls = np.log([q[1] for q in pairs])
    a = np.vstack([lr, np.ones_like(lr)]).T
    coef, *_ = np.linalg.lstsq(a, ls, rcond=None)
    rss = float(np.sum((ls - a @ coef) ** 2))
    return LineFit(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        rss=rss,
        radii=[q[0] for q in pairs],
        sups=[q[1] for q in pairs],
        dropped_zero=dropped,
    )


def measure_growth(
    u: ScalarField,
    y_index,
    r_max: float,
    count: int,
    alpha: float,
    gradient_source: str = "numeric",
    analytic_gradient=None,
    expected_exponent: float | None = None,
    margin_factor: float = CENTER_MARGIN,
) -> GrowthFit:
    """Growth suprema over dyadic radii plus the exponent fit."""
    grid = u.grid
    y_index = _as_index(grid, y_index)
    radii = dyadic_radii(grid, r_max, count)
    sups = [
        growth_sup(u, y_index, r, gradient_source, analytic_gradient, margin_factor)
        for r in radii
    ]
    fit = fit_exponent(radii, sups)
    return GrowthFit(
        center=tuple(float(c) for c in grid.node_coords(y_index)),
        radii=radii,
        sups=sups,
        fitted_slope=fit.slope,
        fitted_intercept=fit.intercept,
        expected_exponent=(
            1.0 + alpha if expected_exponent is None else float(expected_exponent)
        ),
        alpha_used=float(alpha),
        rss=fit.rss,
        dropped_zero=fit.dropped_zero,
    )


def nondegeneracy_profile(
    solution: EllipticSolution,
    x0_index,
    radii,
    shell_half_width: float | None = None,
    margin_factor: float = CENTER_MARGIN,
) -> NondegReport:
    """Shell suprema m(r) of u - obstacle outside the contact set.

    Hypotheses of the quadratic detachment bound are enforced here:
    p > 2 and a vanishing right-hand side.  Shell values are reported
    raw; the cumulative ball variant (monotone by construction) is
    included for property checks.
    """
    problem = solution.problem
    if problem is None:
        raise MeasurementError("solution carries no problem reference")
    if not problem.p > 2.0:
        raise PreconditionError(
            f"non-degeneracy measurement requires p > 2, got p = {problem.p}"
        )
    if problem.rhs is not None and float(np.max(np.abs(problem.rhs.values))) > 0.0:
        raise PreconditionError(
            "non-degeneracy measurement requires a vanishing right-hand side"
        )
    grid = solution.u.grid
    if shell_half_width is None:
        shell_half_width = grid.hmax
    x0_index = _as_index(grid, x0_index)
    x0 = grid.node_coords(x0_index)
    _check_center_margin(grid, x0, margin_factor)
    gap = solution.u.values - problem.obstacle.values
    outside = ~solution.active.mask & ~problem.boundary_mask
    shell_sups, ball_sups, degenerate = [], [], []
    radii = [float(r) for r in radii]
    for r in radii:
        _check_ball(grid, x0, r)
        shell = nodes_on_shell(grid, x0, r, shell_half_width)
        sel = shell.mask & outside
        if sel.any():
            shell_sups.append(float(np.max(gap[sel])))
            degenerate.append(False)
        else:
            shell_sups.append(0.0)
            degenerate.append(True)
        ball = nodes_in_ball(grid, x0, r + shell_half_width)
        bsel = ball.mask & outside
        ball_sups.append(float(np.max(gap[bsel])) if bsel.any() else 0.0)
    ratios = [m / r**2 for m, r in zip(shell_sups, radii)]
    positive = [q for q in ratios if q > 0.0]
    min_ratio = min(positive) if positive else 0.0
    return NondegReport(
        center=tuple(float(c) for c in x0),
        radii=radii,
        shell_sups=shell_sups,
        ball_sups=ball_sups,
        ratios=ratios,
        min_ratio=min_ratio,
        max_ratio=max(positive) if positive else 0.0,
        epsilon_measured=min_ratio,
        degenerate=degenerate,
        shell_half_width=float(shell_half_width),
    )


def porosity_density(fb: NodeSet, center, r: float) -> float:
    """Fraction of grid cells with center inside B_r that own a free
    boundary node (a cell owns its corner nodes).

    Requires r >= 4 h; below that the cell count is meaningless.
    """
    grid = fb.grid
    if r < 4.0 * grid.hmax - 1e-12:
        raise MeasurementError(
            f"porosity radius {r:.4g} is below 4 h = {4 * grid.hmax:.4g}"
        )
    center = np.atleast_1d(np.asarray(center, dtype=float))
    mask = fb.mask
    if grid.dim == 1:
        owns = mask[:-1] | mask[1:]
        cx = grid.axis(0)[:-1] + 0.5 * grid.spacing[0]
        inside = np.abs(cx - center[0]) <= r
    else:
        owns = mask[:-1, :-1] | mask[1:, :-1] | mask[:-1, 1:] | mask[1:, 1:]
        cx = grid.axis(0)[:-1] + 0.5 * grid.spacing[0]
        cy = grid.axis(1)[:-1] + 0.5 * grid.spacing[1]
        xx, yy = np.meshgrid(cx, cy, indexing="ij")
        inside = (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= r * r
    total = int(inside.sum())
    if total == 0:
        raise MeasurementError(f"no cell centers inside the ball of radius {r:.4g}")
    return float(np.sum(owns & inside)) / total


def porosity_profile(fb: NodeSet, points, radii) -> PorosityReport:
    """Density table over several free-boundary points and radii."""
    grid = fb.grid
    radii = [float(r) for r in radii]
    rows, centers = [], []
    for pt in points:
        idx = _as_index(grid, pt)
        center = grid.node_coords(idx)
        centers.append(tuple(float(c) for c in center))
        rows.append([porosity_density(fb, center, r) for r in radii])
    if not rows:
        raise MeasurementError("porosity profile needs at least one point")
    max_density = max(max(row) for row in rows)
    return PorosityReport(
        points=centers,
        radii=radii,
        densities=rows,
        max_density=max_density,
        delta_measured=1.0 - max_density,
    )


def blowup_rescale(
    u: ScalarField,
    y_index,
    r: float,
    alpha: float,
    obstacle: ScalarField | None = None,
    rhs: ScalarField | None = None,
    p: float | None = None,
    ref_counts: int = 65,
    margin_factor: float = CENTER_MARGIN,
) -> BlowupField:
    """Zoom of u around node y at scale r, normalized by r^(1+alpha).

    The rescaled field lives on a fixed reference grid over [-1, 1]^dim
    regardless of r, with value exactly 0 at the origin.  The obstacle
    is rescaled the same way; the right-hand side picks up the factor
    r^(1 - alpha (p-1)) so that a scale-critical alpha leaves it
    invariant.
    """
    grid = u.grid
    y_index = _as_index(grid, y_index)
    y = grid.node_coords(y_index)
    _check_center_margin(grid, y, margin_factor)
    _check_ball(grid, y, r)
    if rhs is not None and p is None:
        raise MeasurementError("rescaling a right-hand side requires p")
    if ref_counts % 2 == 0 or ref_counts < 3:
        raise MeasurementError("reference grid needs odd counts >= 3 so 0 is a node")
    ref = build_grid(
        Domain(lo=(-1.0,) * grid.dim, hi=(1.0,) * grid.dim),
        (ref_counts,) * grid.dim,
    )
    scale = r ** (1.0 + alpha)
    uy = float(u.values[y_index])
    phiy = float(obstacle.values[y_index]) if obstacle is not None else 0.0
    u_hat = np.empty(ref.shape)
    phi_hat = np.empty(ref.shape) if obstacle is not None else None
    f_hat = np.empty(ref.shape) if rhs is not None else None
    fscale = r ** (1.0 - alpha * (p - 1.0)) if rhs is not None else 0.0
    for idx in np.ndindex(*ref.shape):
        x = y + r * ref.node_coords(idx)
        u_hat[idx] = (interpolate(u, x) - uy) / scale
        if phi_hat is not None:
            phi_hat[idx] = (interpolate(obstacle, x) - phiy) / scale
        if f_hat is not None:
            f_hat[idx] = fscale * interpolate(rhs, x)
    origin = (ref_counts // 2,) * grid.dim
    u_hat[origin] = 0.0  # exact by construction; pin against roundoff
    return BlowupField(
        grid=ref,
        u=ScalarField(ref, u_hat),
        obstacle=ScalarField(ref, phi_hat) if phi_hat is not None else None,
        rhs=ScalarField(ref, f_hat) if f_hat is not None else None,
        center=y,
        r=r,
        alpha=alpha,
    )


def parabolic_growth_sup(
    psolution,
    y_index,
    s_time: float,
    radii,
    gradient_source: str = "numeric",
    analytic_gradient=None,
    margin_factor: float = CENTER_MARGIN,
) -> list:
    """Suprema over backward space-time cylinders B_r x (s - r^q, s].

    q = p/(p-1).  Only stored slices are read, so the time step must
    resolve the shallowest cylinder: dt <= r_min^q / 4.  Returns one
    supremum of |u(x,t) - u(y,s) - (x-y).grad| per radius.
    """
    problem = psolution.problem
    timegrid = psolution.timegrid
    grid = problem.grid
    q = problem.p / (problem.p - 1.0)
    radii = [float(r) for r in radii]
    rmin = min(radii)
    if timegrid.dt > rmin**q / 4.0 + 1e-15:
        raise MeasurementError(
            f"dt = {timegrid.dt:.4g} too coarse for the shallowest cylinder: "
            f"need dt <= r_min^q/4 = {rmin ** q / 4.0:.4g}"
        )
    times = timegrid.times[: len(psolution.slices)]
    ks = int(round((s_time - timegrid.t0) / timegrid.dt))
    if not 0 <= ks < len(times) or abs(times[ks] - s_time) > timegrid.dt / 2 + 1e-12:
        raise MeasurementError(f"anchor time {s_time} is not on the computed slab")
    y_index = _as_index(grid, y_index)
    y = grid.node_coords(y_index)
    _check_center_margin(grid, y, margin_factor)
    u_s = psolution.slices[ks]
    uys = float(u_s.values[y_index])
    grad = tangent_gradient(u_s, y_index, gradient_source, analytic_gradient)
    sups = []
    for r in radii:
        _check_ball(grid, y, r)
        t_bottom = s_time - r**q
        if t_bottom < timegrid.t0 - 1e-12:
            raise MeasurementError(
                f"cylinder of radius {r:.4g} reaches below the initial time"
            )
        ball = nodes_in_ball(grid, y, r)
        coords = ball.coordinates()
        plane = uys + (coords - y[None, :]) @ grad
        sup = 0.0
        for k in range(ks, -1, -1):
            if times[k] <= t_bottom + 1e-12:
                break
            vals = psolution.slices[k].values[ball.mask]
            sup = max(sup, float(np.max(np.abs(vals - plane))))
        sups.append(sup)
    return sups


def measure_parabolic_growth(
    psolution,
    y_index,
    s_time: float,
    r_max: float,
    count: int,
    gradient_source: str = "numeric",
    analytic_gradient=None,
    margin_factor: float = CENTER_MARGIN,
) -> GrowthFit:
    """Cylinder growth suprema over dyadic radii plus the exponent fit.

    The expected exponent is the intrinsic scaling q = p/(p-1).
    """
    grid = psolution.problem.grid
    q = psolution.problem.p / (psolution.problem.p - 1.0)
    radii = dyadic_radii(grid, r_max, count)
    sups = parabolic_growth_sup(
        psolution, y_index, s_time, radii, gradient_source, analytic_gradient,
        margin_factor,
    )
    fit = fit_exponent(radii, sups)
    y_index = _as_index(grid, y_index)
    return GrowthFit(
        center=tuple(float(c) for c in grid.node_coords(y_index)) + (float(s_time),),
        radii=radii,
        sups=sups,
        fitted_slope=fit.slope,
        fitted_intercept=fit.intercept,
        expected_exponent=q,
        alpha_used=q - 1.0,
        rss=fit.rss,
        dropped_zero=fit.dropped_zero,
    )
