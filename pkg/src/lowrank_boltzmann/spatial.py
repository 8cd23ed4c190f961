"""Uniform cell-centred physical grids, first-order upwind differences and weighted linear algebra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Cell-centred grid ``x_p = a + (p - 1/2) dx`` on a box in 1 or 2 dimensions."""

    bounds: tuple
    n: tuple

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        if len(bounds) != len(n) or len(n) not in (1, 2):
            raise ValueError("spatial grid must be 1D or 2D with one bound pair per dimension")
        for (a, b), k in zip(bounds, n):
            if not b > a:
                raise ValueError(f"empty interval [{a}, {b}]")
            if k < 1:
                raise ValueError("need at least one cell per dimension")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "n", n)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def dx(self) -> tuple:
        return tuple((b - a) / k for (a, b), k in zip(self.bounds, self.n))

    @property
    def weight(self) -> float:
        """Cell volume."""
        return float(np.prod(self.dx))

    def centers(self, k: int) -> np.ndarray:
        a, _ = self.bounds[k]
        return a + (np.arange(self.n[k]) + 0.5) * self.dx[k]

    def coordinates(self) -> np.ndarray:
        """All cell centres, shape ``(size, dim)`` in C order."""
        axes = np.meshgrid(*[self.centers(k) for k in range(self.dim)], indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    def face_shape(self, k: int) -> tuple:
        return tuple(m for i, m in enumerate(self.n) if i != k)

    def describe(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds], "n": list(self.n)}

    def __eq__(self, other):
        return isinstance(other, SpatialGrid) and self.describe() == other.describe()

    def __hash__(self):
        return hash((self.bounds, self.n))

    def __repr__(self):
        return f"SpatialGrid(bounds={self.bounds}, n={self.n})"


def build_spatial_grid(bounds, n) -> SpatialGrid:
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    return SpatialGrid(tuple(map(tuple, bounds)), tuple(np.atleast_1d(n)))


def upwind_diff(grid: SpatialGrid, field, direction: int, side: str, ghost) -> np.ndarray:
    """First-order one-sided difference along ``direction``.

    ``field`` has shape ``(grid.size, ...)``.  ``side="plus"`` gives the
    backward difference ``(u_p - u_{p-1}) / dx`` and needs ``ghost`` values on
    the low face; ``side="minus"`` gives ``(u_{p+1} - u_p) / dx`` and needs the
    high face.  ``ghost`` has shape ``grid.face_shape(direction) + trailing``.
    """
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    if ghost is None:
        raise ValueError("a ghost layer is required for the inflow face")
    field = np.asarray(field)
    trailing = field.shape[1:]
    u = field.reshape(grid.shape + trailing)
    ghost = np.asarray(ghost).reshape(grid.face_shape(direction) + trailing)
    g = np.expand_dims(ghost, direction)
    h = grid.dx[direction]
    if side == "plus":
        lower = np.concatenate([g, np.delete(u, -1, axis=direction)], axis=direction)
        out = (u - lower) / h
    else:
        upper = np.concatenate([np.delete(u, 0, axis=direction), g], axis=direction)
        out = (upper - u) / h
    return out.reshape(field.shape)


def face_values(grid: SpatialGrid, field, direction: int, high: bool) -> np.ndarray:
    """Values in the cells adjacent to one face, shape ``face_shape + trailing``."""
    field = np.asarray(field)
    trailing = field.shape[1:]
    u = field.reshape(grid.shape + trailing)
    idx = -1 if high else 0
    return np.take(u, idx, axis=direction)


def inner_x(grid: SpatialGrid, f, g):
    """Midpoint-rule inner product ``sum_p f(x_p) g(x_p) |cell|``."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape[0] != grid.size or g.shape[0] != grid.size:
        raise ValueError(f"field length mismatch: {f.shape[0]}, {g.shape[0]} vs {grid.size} cells")
    return np.tensordot(f, g, axes=(0, 0)) * grid.weight


def weighted_qr(A, weight: float):
    """QR factorisation orthonormal in the inner product ``weight * x^T y``.

    Returns ``(Q, R)`` with ``A = Q R``, ``weight * Q^T Q = I`` and the
    diagonal of ``R`` nonnegative.
    """
    s = np.sqrt(weight)
    q, r = np.linalg.qr(s * np.asarray(A, dtype=float))
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    q = q * signs
    r = r * signs[:, None]
    return q / s, r


def weighted_svd(F, weight_rows: float, weight_cols: float):
    """SVD of ``F`` in weighted norms: ``F = U diag(s) W^T`` with weighted-orthonormal factors."""
    a = np.sqrt(weight_rows)
    b = np.sqrt(weight_cols)
    u, s, wt = np.linalg.svd(a * b * np.asarray(F, dtype=float), full_matrices=False)
    return u / a, s, wt.T / b
