"""Manufactured obstacle presets with certified smoothness.

Each preset packages an obstacle, compatible boundary data, an optional
constant right-hand side and (where available) the exact solution, all
as closed forms with analytic gradients.  The Hölder class of the
obstacle gradient (certified_beta) and the sign certificate for the
obstacle's p-Laplacian are stated per family, since the growth and
non-degeneracy pipelines require them as hypotheses rather than
inferring them from samples.

Families (x1 denotes the first coordinate, rho the distance to a
center):

* pressed_ramp: obstacle -kappa ((a - x1)+)^2 with constant rhs f0 > 0.
  The solution equals the obstacle on {x1 <= a} and detaches as
  c_f ((x1 - a)+)^q, q = p/(p-1), with c_f = f0^(1/(p-1)) / q.  On the
  contact side the obstacle is a strict supersolution; across the
  junction both value and flux are continuous, so the glued profile is
  the exact minimizer.  Tangent growth at the free boundary is
  max(kappa r^2, c_f r^q), so the measured exponent is
  1 + min(1/(p-1), 1): the inhomogeneous growth law for a beta = 1
  obstacle.
* ramp_detach: obstacle -kappa ((a - x1)+)^(1+beta) - mu ((x1 - a)+)^2
  with zero rhs.  The exact solution is the first term alone: it is a
  supersolution on the contact side (its p-Laplacian is strictly
  negative there), identically zero past the junction, and the pieces
  match to first order.  Growth at the free boundary is exactly
  kappa r^(1+beta), the homogeneous law for a C^(1,beta) obstacle.
* dome: obstacle height - curvature rho^2, zero boundary data, zero
  rhs.  No closed-form solution; the contact set is a disc and the
  free boundary a discrete ring, which is what the non-degeneracy and
  porosity pipelines need.  The obstacle's p-Laplacian is
  -(2 curvature)^(p-1) (n + p - 2) rho^(p-2), strictly negative away
  from the apex.
* halfspace_ramp: zero obstacle with rhs f0 and boundary data from the
  exact profile c ((x1 - a)+)^q (the manufactured convergence family).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import EllipticProblem
from .errors import ConfigurationError
from .mesh import Grid, ScalarField
from .oracles import catalog

__all__ = ["Preset", "PRESET_NAMES", "preset"]

PRESET_NAMES = ("pressed_ramp", "ramp_detach", "dome", "halfspace_ramp")


@dataclass(frozen=True)
class Preset:
    """Closed-form problem data for one manufactured configuration.

    _obstacle/_boundary/_exact are vectorized over coordinate arrays;
    gradient takes point coordinates and returns the exact obstacle
    gradient (the tangent-slope source for growth fits).  rhs0 is the
    constant right-hand side (None means zero).  plap_negative records
    the analytic certificate that the obstacle's p-Laplacian is
    negative away from degenerate points; expected_alpha is the growth
    exponent the family is engineered to exhibit.
    """

    name: str
    p: float
    dim: int
    params: dict
    certified_beta: float
    plap_negative: bool
    expected_alpha: float | None
    anchor: tuple
    rhs0: float | None
    _obstacle: callable
    _boundary: callable
    _exact: callable | None
    _gradient: callable

    def obstacle_field(self, grid: Grid) -> ScalarField:
        self._check(grid)
        return ScalarField(grid, self._obstacle(grid.meshgrid()))

    def boundary_field(self, grid: Grid) -> ScalarField:
        self._check(grid)
        return ScalarField(grid, self._boundary(grid.meshgrid()))

    def rhs_field(self, grid: Grid) -> ScalarField | None:
        if self.rhs0 is None:
            return None
        self._check(grid)
        return ScalarField(grid, np.full(grid.shape, self.rhs0))

    @property
    def has_exact(self) -> bool:
        return self._exact is not None

    def exact_field(self, grid: Grid) -> ScalarField | None:
        if self._exact is None:
            return None
        self._check(grid)
        return ScalarField(grid, self._exact(grid.meshgrid()))

    def gradient(self, *point) -> tuple:
        g = self._gradient(*point)
        return tuple(float(c) for c in np.atleast_1d(g))

    def problem(self, grid: Grid) -> EllipticProblem:
        return EllipticProblem(
            grid,
            self.p,
            self.obstacle_field(grid),
            self.boundary_field(grid),
            rhs=self.rhs_field(grid),
        )

    def _check(self, grid: Grid):
        if grid.dim != self.dim:
            raise ConfigurationError(
                f"preset {self.name} is {self.dim}-dimensional, "
                f"grid is {grid.dim}-dimensional"
            )


def _x1(coords):
    return coords[0]


def _build_pressed_ramp(p: float, dim: int, params: dict) -> Preset:
    q = p / (p - 1.0)
    a = float(params.get("a", 0.0))
    kappa = float(params.get("kappa", 0.5 if p >= 2.0 else 1.0))
    c_f = float(params.get("c_f", 3.0 if p >= 2.0 else 0.3))
    if kappa <= 0.0 or c_f <= 0.0:
        raise ConfigurationError("pressed_ramp requires kappa > 0 and c_f > 0")
    f0 = (c_f * q) ** (p - 1.0)

    def obstacle(coords):
        return -kappa * np.maximum(a - _x1(coords), 0.0) ** 2

    def exact(coords):
        x = _x1(coords)
        return (
            -kappa * np.maximum(a - x, 0.0) ** 2
            + c_f * np.maximum(x - a, 0.0) ** q
        )

    def gradient(*point):
        x = point[0]
        g = np.zeros(dim)
        g[0] = 2.0 * kappa * max(a - x, 0.0)
        return g

    return Preset(
        name="pressed_ramp",
        p=p,
        dim=dim,
        params={"a": a, "kappa": kappa, "c_f": c_f, "f0": f0},
        certified_beta=1.0,
        plap_negative=True,
        expected_alpha=min(1.0 / (p - 1.0), 1.0),
        anchor=(a,) + (0.0,) * (dim - 1),
        rhs0=f0,
        _obstacle=obstacle,
        _boundary=exact,
        _exact=exact,
        _gradient=gradient,
    )


def _build_ramp_detach(p: float, dim: int, params: dict) -> Preset:
    beta = float(params.get("beta", 1.0))
    if not 0.0 < beta <= 1.0:
        raise ConfigurationError(f"ramp_detach requires 0 < beta <= 1, got {beta}")
    a = float(params.get("a", 0.0))
    kappa = float(params.get("kappa", 1.0))
    mu = float(params.get("mu", 1.0))
    if kappa <= 0.0 or mu <= 0.0:
        raise ConfigurationError("ramp_detach requires kappa > 0 and mu > 0")

    def obstacle(coords):
        x = _x1(coords)
        return (
            -kappa * np.maximum(a - x, 0.0) ** (1.0 + beta)
            - mu * np.maximum(x - a, 0.0) ** 2
        )

    def exact(coords):
        return -kappa * np.maximum(a - _x1(coords), 0.0) ** (1.0 + beta)

    def gradient(*point):
        x = point[0]
        g = np.zeros(dim)
        g[0] = kappa * (1.0 + beta) * max(a - x, 0.0) ** beta - 2.0 * mu * max(
            x - a, 0.0
        )
        return g

    return Preset(
        name="ramp_detach",
        p=p,
        dim=dim,
        params={"a": a, "kappa": kappa, "mu": mu, "beta": beta},
        certified_beta=beta,
        plap_negative=True,
        expected_alpha=beta,
        anchor=(a,) + (0.0,) * (dim - 1),
        rhs0=None,
        _obstacle=obstacle,
        _boundary=exact,
        _exact=exact,
        _gradient=gradient,
    )


def _build_dome(p: float, dim: int, params: dict) -> Preset:
    height = float(params.get("height", 0.16))
    curvature = float(params.get("curvature", 1.0))
    if height <= 0.0 or curvature <= 0.0:
        raise ConfigurationError("dome requires height > 0 and curvature > 0")
    center = tuple(float(c) for c in params.get("center", (0.0,) * dim))
    if len(center) != dim:
        raise ConfigurationError("dome center must match the dimension")

    def rho2(coords):
        out = np.zeros(coords[0].shape)
        for c, ck in zip(coords, center):
            out = out + (c - ck) ** 2
        return out

    def obstacle(coords):
        return height - curvature * rho2(coords)

    def boundary(coords):
        return np.zeros(coords[0].shape)

    def gradient(*point):
        return tuple(-2.0 * curvature * (x - ck) for x, ck in zip(point, center))

    return Preset(
        name="dome",
        p=p,
        dim=dim,
        params={"height": height, "curvature": curvature, "center": center},
        certified_beta=1.0,
        plap_negative=True,
        expected_alpha=None,
        anchor=(center[0] + np.sqrt(height / curvature),) + center[1:],
        rhs0=None,
        _obstacle=obstacle,
        _boundary=boundary,
        _exact=None,
        _gradient=gradient,
    )


def _build_halfspace_ramp(p: float, dim: int, params: dict) -> Preset:
    entry = catalog("elliptic_halfspace", p, dim, params)
    a = entry.params["a"]
    f0 = entry.params["f0"]
    c = entry.constant_used

    def obstacle(coords):
        return np.zeros(coords[0].shape)

    def exact(coords):
        return entry._value(coords, 0.0)

    def gradient(*point):
        # the obstacle is identically zero; at the free boundary this
        # also matches the exact solution's vanishing gradient
        return np.zeros(dim)

    return Preset(
        name="halfspace_ramp",
        p=p,
        dim=dim,
        params={"a": a, "f0": f0, "c": c},
        certified_beta=1.0,
        plap_negative=False,
        expected_alpha=1.0 / (p - 1.0),
        anchor=(a,) + (0.0,) * (dim - 1),
        rhs0=f0,
        _obstacle=obstacle,
        _boundary=exact,
        _exact=exact,
        _gradient=gradient,
    )


_BUILDERS = {
    "pressed_ramp": _build_pressed_ramp,
    "ramp_detach": _build_ramp_detach,
    "dome": _build_dome,
    "halfspace_ramp": _build_halfspace_ramp,
}


def preset(name: str, p: float, dim: int = 2, params: dict | None = None) -> Preset:
    """Build a manufactured preset by name."""
    if name not in _BUILDERS:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose from {PRESET_NAMES}"
        )
    if not (p > 1.0 and np.isfinite(p)):
        raise ConfigurationError(f"exponent p must satisfy 1 < p < inf, got {p}")
    if dim not in (1, 2):
        raise ConfigurationError(f"dimension must be 1 or 2, got {dim}")
    return _BUILDERS[name](float(p), int(dim), dict(params or {}))
