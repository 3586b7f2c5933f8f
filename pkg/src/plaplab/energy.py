"""Discrete p-Dirichlet energy on P1 elements.

1D elements are the grid intervals; 2D cells are split into two
triangles along the diagonal from the lower-left to the upper-right
corner.  The gradient is constant on each element, so

    E(v) = sum_T |g_T|^p / p * vol_T,         1 < p < inf,

with one-point quadrature, and the load term uses mass lumping:
sum_i f_i v_i w_i with trapezoid weights w.  The element formula is
exactly convex and exactly (p-1)-homogeneous in the gradients, and all
solvers use only first derivatives of E.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InfeasibleError
from .mesh import Grid, ScalarField

__all__ = [
    "EnergyParams",
    "ElementMesh",
    "element_mesh",
    "dirichlet_energy",
    "dirichlet_gradient",
    "total_energy",
    "energy_gradient",
    "discrete_p_laplacian",
    "complementarity_residual",
]


@dataclass(frozen=True)
class ElementMesh:
    """Per-element node indices (flat), gradient coefficients and volumes.

    nodes  : (ne, dim+1) int64, flat node indices in C order
    coeffs : (ne, dim+1, dim) float64, d(g_T)/d(v_node)
    vols   : (ne,) float64
    """

    nodes: np.ndarray
    coeffs: np.ndarray
    vols: np.ndarray


def element_mesh(grid: Grid) -> ElementMesh:
    """Element tables for a grid; cached on the grid instance."""
    cached = getattr(grid, "_element_mesh", None)
    if cached is not None:
        return cached
    if grid.dim == 1:
        n = grid.counts[0]
        h = grid.spacing[0]
        left = np.arange(n - 1, dtype=np.int64)
        nodes = np.stack([left, left + 1], axis=1)
        coeffs = np.broadcast_to(
            np.array([[-1.0 / h], [1.0 / h]]), (n - 1, 2, 1)
        ).copy()
        vols = np.full(n - 1, h)
    else:
        nx, ny = grid.counts
        hx, hy = grid.spacing
        ii, jj = np.meshgrid(
            np.arange(nx - 1, dtype=np.int64),
            np.arange(ny - 1, dtype=np.int64),
            indexing="ij",
        )
        a = (ii * ny + jj).ravel()          # (i, j)
        b = ((ii + 1) * ny + jj).ravel()    # (i+1, j)
        c = ((ii + 1) * ny + jj + 1).ravel()  # (i+1, j+1)
        d = (ii * ny + jj + 1).ravel()      # (i, j+1)
        ncell = a.size
        # lower triangle (a, b, c): g = ((vb-va)/hx, (vc-vb)/hy)
        low_nodes = np.stack([a, b, c], axis=1)
        low_coeffs = np.broadcast_to(
            np.array(
                [[-1.0 / hx, 0.0], [1.0 / hx, -1.0 / hy], [0.0, 1.0 / hy]]
            ),
            (ncell, 3, 2),
        )
        # upper triangle (a, c, d): g = ((vc-vd)/hx, (vd-va)/hy)
        up_nodes = np.stack([a, c, d], axis=1)
        up_coeffs = np.broadcast_to(
            np.array(
                [[0.0, -1.0 / hy], [1.0 / hx, 0.0], [-1.0 / hx, 1.0 / hy]]
            ),
            (ncell, 3, 2),
        )
        nodes = np.concatenate([low_nodes, up_nodes], axis=0)
        coeffs = np.concatenate([low_coeffs, up_coeffs], axis=0).copy()
        vols = np.full(2 * ncell, 0.5 * hx * hy)
    em = ElementMesh(nodes=nodes, coeffs=coeffs, vols=vols)
    grid._element_mesh = em
    return em


@dataclass(frozen=True)
class EnergyParams:
    """Exponent p, optional right-hand side f, and the owning grid."""

    grid: Grid
    p: float
    rhs: ScalarField | None = None

    def __post_init__(self):
        if not (self.p > 1.0 and np.isfinite(self.p)):
            raise ConfigurationError(f"exponent p must satisfy 1 < p < inf, got {self.p}")
        if self.rhs is not None and self.rhs.grid != self.grid:
            raise ConfigurationError("rhs lives on a different grid")

    def rhs_values(self) -> np.ndarray:
        if self.rhs is None:
            return np.zeros(self.grid.shape)
        return self.rhs.values


def _check_field(v: ScalarField, grid: Grid | None = None):
    if grid is not None and v.grid != grid:
        raise ConfigurationError("field lives on a different grid")
    if not np.all(np.isfinite(v.values)):
        raise ConfigurationError("field contains non-finite values")


def element_gradients(v: ScalarField) -> np.ndarray:
    """Constant per-element gradients, shape (ne, dim)."""
    em = element_mesh(v.grid)
    vals = v.values.ravel()[em.nodes]
    return np.einsum("eki,ek->ei", em.coeffs, vals)


def dirichlet_energy(v: ScalarField, p: float) -> float:
    """sum_T |grad v|^p / p * vol_T."""
    if not p > 1.0:
        raise ConfigurationError(f"exponent p must exceed 1, got {p}")
    _check_field(v)
    em = element_mesh(v.grid)
    g = element_gradients(v)
    norm = np.sqrt(np.einsum("ei,ei->e", g, g))
    return float(np.dot(norm**p, em.vols) / p)


def dirichlet_gradient(v: ScalarField, p: float) -> ScalarField:
    """Nodal gradient of the p-Dirichlet part (no load term).

    The flux |g|^(p-2) g is taken as 0 where g = 0; for p > 1 that is
    the correct limit, so the assembled gradient is continuous in v.
    """
    if not p > 1.0:
        raise ConfigurationError(f"exponent p must exceed 1, got {p}")
    _check_field(v)
    em = element_mesh(v.grid)
    g = element_gradients(v)
    norm2 = np.einsum("ei,ei->e", g, g)
    w = np.zeros_like(norm2)
    nz = norm2 > 0.0
    w[nz] = norm2[nz] ** (0.5 * (p - 2.0))
    flux = w[:, None] * g
    per_node = np.einsum("eki,ei->ek", em.coeffs, flux) * em.vols[:, None]
    out = np.zeros(v.grid.node_count)
    np.add.at(out, em.nodes.ravel(), per_node.ravel())
    return ScalarField(v.grid, out.reshape(v.grid.shape))


def total_energy(v: ScalarField, params: EnergyParams) -> float:
    """Dirichlet part plus the mass-lumped load sum_i f_i v_i w_i."""
    _check_field(v, params.grid)
    e = dirichlet_energy(v, params.p)
    if params.rhs is not None:
        w = params.grid.lumped_weights()
        e += float(np.sum(params.rhs.values * v.values * w))
    return e


def energy_gradient(v: ScalarField, params: EnergyParams) -> ScalarField:
    """d(total_energy)/d(v_i) at every node."""
    _check_field(v, params.grid)
    out = dirichlet_gradient(v, params.p).values
    if params.rhs is not None:
        out = out + params.rhs.values * params.grid.lumped_weights()
    return ScalarField(params.grid, out)


def discrete_p_laplacian(v: ScalarField, p: float) -> ScalarField:
    """Nodal approximation of div(|grad v|^(p-2) grad v).

    Defined as -(dirichlet gradient)_i / w_i with the lumped weights w;
    exactly (p-1)-homogeneous in v.  Interior nodes carry the consistent
    values; boundary nodes see one-sided element patches.
    """
    g = dirichlet_gradient(v, p)
    w = v.grid.lumped_weights()
    return ScalarField(v.grid, -g.values / w)


def complementarity_residual(
    u: ScalarField,
    phi: ScalarField,
    params: EnergyParams,
    feas_tol: float | None = None,
) -> float:
    """KKT residual max_i |min(g_i, u_i - phi_i)| over interior nodes.

    g is the full energy gradient.  At an exact discrete solution the
    value is 0: active nodes have u = phi and g >= 0, inactive nodes
    have g = 0.  Raises InfeasibleError (with the worst node index) if
    u < phi beyond feas_tol.
    """
    _check_field(u, params.grid)
    _check_field(phi, params.grid)
    gap = u.values - phi.values
    scale = 1.0 + float(np.max(np.abs(u.values))) + float(np.max(np.abs(phi.values)))
    if feas_tol is None:
        feas_tol = 1e-12 * scale
    worst = np.unravel_index(np.argmin(gap), gap.shape)
    if gap[worst] < -feas_tol:
        raise InfeasibleError(
            f"u < phi by {-gap[worst]:.3e} at node {tuple(int(i) for i in worst)}",
            node=tuple(int(i) for i in worst),
        )
    g = energy_gradient(u, params).values
    interior = ~params.grid.boundary_mask()
    r = np.minimum(g, gap)[interior]
    return float(np.max(np.abs(r))) if r.size else 0.0
