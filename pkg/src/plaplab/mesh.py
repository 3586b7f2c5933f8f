"""Uniform tensor-product grids and nodal scalar fields.

Grids are 1D or 2D axis-aligned boxes with nodes at lo + i*h per axis,
h = (hi - lo)/(count - 1).  Fields are float64 arrays shaped like the
grid (C order, last axis fastest); that flattening order is also the
node order used in binary dumps.  All downstream machinery (energies,
solvers, free-boundary measurements) works on these carriers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "Domain",
    "Grid",
    "ScalarField",
    "NodeSet",
    "build_grid",
    "refine",
    "prolong",
    "nodes_in_ball",
    "nodes_on_shell",
    "interpolate",
    "gradient_at",
]


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box: the product of [lo[k], hi[k]]."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ConfigurationError("lo and hi must have the same length")
        if len(lo) not in (1, 2):
            raise ConfigurationError(f"dimension must be 1 or 2, got {len(lo)}")
        for k, (a, b) in enumerate(zip(lo, hi)):
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ConfigurationError(f"axis {k}: bounds must be finite")
            if b <= a:
                raise ConfigurationError(f"axis {k}: hi must exceed lo, got [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum((b - a) ** 2 for a, b in zip(self.lo, self.hi))))

    def contains(self, x, slack: float = 0.0) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ConfigurationError(f"point has wrong dimension {x.shape}")
        return all(
            a - slack <= v <= b + slack for v, a, b in zip(x, self.lo, self.hi)
        )


class Grid:
    """Uniform node lattice over a Domain.

    Node coordinates are computed as lo + i*h, never stored tables, so
    they reproduce bit-identically run to run.
    """

    def __init__(self, domain: Domain, counts):
        counts = tuple(int(c) for c in np.atleast_1d(counts))
        if len(counts) != domain.dim:
            raise ConfigurationError("counts length must match domain dimension")
        for k, c in enumerate(counts):
            if c < 3:
                raise ConfigurationError(f"axis {k}: need at least 3 nodes, got {c}")
        self.domain = domain
        self.counts = counts
        self.spacing = tuple(
            (domain.hi[k] - domain.lo[k]) / (counts[k] - 1) for k in range(domain.dim)
        )
        self._weights = None

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def node_count(self) -> int:
        return int(np.prod(self.counts))

    @property
    def hmax(self) -> float:
        return max(self.spacing)

    def axis(self, k: int) -> np.ndarray:
        return self.domain.lo[k] + np.arange(self.counts[k]) * self.spacing[k]

    def meshgrid(self):
        """Coordinate arrays shaped like the grid (indexing='ij')."""
        return np.meshgrid(*(self.axis(k) for k in range(self.dim)), indexing="ij")

    def node_coords(self, index) -> np.ndarray:
        index = tuple(np.atleast_1d(index).astype(int))
        return np.array(
            [self.domain.lo[k] + index[k] * self.spacing[k] for k in range(self.dim)]
        )

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[k] = 0
            mask[tuple(sl)] = True
            sl[k] = -1
            mask[tuple(sl)] = True
        return mask

    def lumped_weights(self) -> np.ndarray:
        """Trapezoid node weights; positive, summing to the box volume."""
        if self._weights is None:
            axes = []
            for k in range(self.dim):
                w = np.full(self.counts[k], self.spacing[k])
                w[0] = w[-1] = 0.5 * self.spacing[k]
                axes.append(w)
            if self.dim == 1:
                self._weights = axes[0].copy()
            else:
                self._weights = np.multiply.outer(axes[0], axes[1])
        return self._weights

    def contains(self, x, slack_factor: float = 1e-12) -> bool:
        return self.domain.contains(x, slack=self.hmax * slack_factor)

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.domain == other.domain
            and self.counts == other.counts
        )

    def __hash__(self):
        return hash((self.domain, self.counts))

    def __repr__(self):
        return f"Grid(domain={self.domain!r}, counts={self.counts})"


def build_grid(domain: Domain, counts) -> Grid:
    """Validated Grid constructor; counts is nodes per axis (each >= 3)."""
    return Grid(domain, counts)


def refine(grid: Grid, factor: int = 2) -> Grid:
    """Same domain with each cell split into `factor` cells per axis."""
    if factor < 1 or int(factor) != factor:
        raise ConfigurationError(f"refinement factor must be a positive integer, got {factor}")
    return Grid(grid.domain, tuple((n - 1) * int(factor) + 1 for n in grid.counts))


class ScalarField:
    """Nodal float64 values shaped like the grid."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ConfigurationError(
                f"field shape {values.shape} does not match grid {grid.shape}"
            )
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        """Sample fn on the grid; fn receives coordinate arrays."""
        vals = np.asarray(fn(*grid.meshgrid()), dtype=float)
        return cls(grid, np.broadcast_to(vals, grid.shape).copy())

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def __repr__(self):
        return f"ScalarField(grid={self.grid.counts}, range=[{self.values.min():.3g}, {self.values.max():.3g}])"


class NodeSet:
    """Boolean node mask over a grid."""

    def __init__(self, grid: Grid, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ConfigurationError("mask shape does not match grid")
        self.grid = grid
        self.mask = mask

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def indices(self) -> np.ndarray:
        """Node multi-indices, one row per member, lexicographic order."""
        return np.argwhere(self.mask)

    def coordinates(self) -> np.ndarray:
        idx = self.indices()
        lo = np.array(self.grid.domain.lo)
        h = np.array(self.grid.spacing)
        return lo + idx * h

    def __repr__(self):
        return f"NodeSet(count={self.count} of {self.grid.node_count})"


def _distance_sq(grid: Grid, center) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (grid.dim,):
        raise ConfigurationError("center has wrong dimension")
    d2 = np.zeros(grid.shape)
    for k, xk in enumerate(grid.meshgrid()):
        d2 += (xk - center[k]) ** 2
    return d2


def nodes_in_ball(grid: Grid, center, r: float) -> NodeSet:
    """Nodes with |x - center| <= r (closed ball)."""
    if r < 0:
        raise ConfigurationError("radius must be nonnegative")
    return NodeSet(grid, _distance_sq(grid, center) <= r * r)


def nodes_on_shell(grid: Grid, center, r: float, half_width: float) -> NodeSet:
    """Nodes with distance in the half-open band (r - hw, r + hw]."""
    if r <= 0 or half_width <= 0:
        raise ConfigurationError("shell radius and half width must be positive")
    d = np.sqrt(_distance_sq(grid, center))
    return NodeSet(grid, (d > r - half_width) & (d <= r + half_width))


def prolong(field: ScalarField, target: Grid) -> ScalarField:
    """Multilinear resample of a field onto another grid over the same box.

    Nested refinements reproduce nodal values exactly at coincident
    nodes; new nodes get the P1 interpolant.
    """
    src = field.grid
    if src.domain != target.domain:
        raise ConfigurationError("prolongation requires matching boxes")
    if src.dim == 1:
        out = np.interp(target.axis(0), src.axis(0), field.values)
        return ScalarField(target, out)
    gx, gy = src.axis(0), src.axis(1)
    tx, ty = target.axis(0), target.axis(1)
    i = np.clip(np.searchsorted(gx, tx, side="right") - 1, 0, len(gx) - 2)
    j = np.clip(np.searchsorted(gy, ty, side="right") - 1, 0, len(gy) - 2)
    fx = np.clip((tx - gx[i]) / (gx[i + 1] - gx[i]), 0.0, 1.0)
    fy = np.clip((ty - gy[j]) / (gy[j + 1] - gy[j]), 0.0, 1.0)
    v = field.values
    v00 = v[np.ix_(i, j)]
    v10 = v[np.ix_(i + 1, j)]
    v01 = v[np.ix_(i, j + 1)]
    v11 = v[np.ix_(i + 1, j + 1)]
    wx0, wx1 = (1.0 - fx)[:, None], fx[:, None]
    wy0, wy1 = (1.0 - fy)[None, :], fy[None, :]
    out = v00 * wx0 * wy0 + v10 * wx1 * wy0 + v01 * wx0 * wy1 + v11 * wx1 * wy1
    return ScalarField(target, out)


def interpolate(field: ScalarField, x) -> float:
    """Multilinear interpolation at point x; exact for affine fields.

    Points outside the box raise DomainError; a rounding slack of
    h * 1e-12 per axis is forgiven and clamped.
    """
    grid = field.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (grid.dim,):
        raise ConfigurationError("point has wrong dimension")
    cells = []
    weights = []
    for k in range(grid.dim):
        h = grid.spacing[k]
        lo, hi = grid.domain.lo[k], grid.domain.hi[k]
        slack = h * 1e-12
        if x[k] < lo - slack or x[k] > hi + slack:
            raise DomainError(
                f"point {tuple(x)} outside domain on axis {k} ([{lo}, {hi}])"
            )
        t = (min(max(x[k], lo), hi) - lo) / h
        i = min(int(np.floor(t)), grid.counts[k] - 2)
        cells.append(i)
        weights.append(t - i)
    if grid.dim == 1:
        i = cells[0]
        s = weights[0]
        v = field.values
        return float((1 - s) * v[i] + s * v[i + 1])
    i, j = cells
    s, t = weights
    v = field.values
    return float(
        (1 - s) * (1 - t) * v[i, j]
        + s * (1 - t) * v[i + 1, j]
        + (1 - s) * t * v[i, j + 1]
        + s * t * v[i + 1, j + 1]
    )


def gradient_at(field: ScalarField, index):
    """Finite-difference gradient at a node.

    Centered second-order differences in the interior; one-sided
    second-order stencils on the boundary, in which case the returned
    flag is True.

    Returns (gradient ndarray, one_sided flag).
    """
    grid = field.grid
    index = tuple(int(i) for i in np.atleast_1d(index))
    if len(index) != grid.dim:
        raise ConfigurationError("node index has wrong dimension")
    for k, i in enumerate(index):
        if not 0 <= i < grid.counts[k]:
            raise ConfigurationError(f"node index {index} outside grid")
    v = field.values
    grad = np.zeros(grid.dim)
    one_sided = False
    for k in range(grid.dim):
        h = grid.spacing[k]
        n = grid.counts[k]
        i = index[k]

        def at(j, axis=k):
            full = list(index)
            full[axis] = j
            return v[tuple(full)] if grid.dim > 1 else v[full[0]]

        if i == 0:
            grad[k] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            one_sided = True
        elif i == n - 1:
            grad[k] = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
            one_sided = True
        else:
            grad[k] = (at(i + 1) - at(i - 1)) / (2.0 * h)
    return grad, one_sided
