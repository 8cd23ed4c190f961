"""Inflow and Maxwell-diffusive wall conditions for both engines.

A face is named ``x{k}_low`` / ``x{k}_high``.  On each face the velocity nodes
are split by the sign of ``(v - u_w) . n`` with ``n`` the outward normal:
negative nodes are inflow and take prescribed data, the remaining nodes
(including the tangent ones) are outflow and are copied from the adjacent
interior cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spatial import SpatialGrid, face_values
from .velocity import VelocityGrid, maxwellian


@dataclass(frozen=True)
class Inflow:
    rho: float
    u: tuple
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("inflow temperature must be positive")
        if self.rho < 0:
            raise ValueError("inflow density must be nonnegative")


@dataclass(frozen=True, eq=False)
class Diffusive:
    """Diffusive wall; ``T_w`` is a scalar or one value per boundary cell."""

    u_w: tuple
    T_w: object

    def __post_init__(self):
        if np.any(np.asarray(self.T_w, dtype=float) <= 0):
            raise ValueError("wall temperature must be positive")


def face_name(direction: int, high: bool) -> str:
    return f"x{direction + 1}_{'high' if high else 'low'}"


def parse_face(name: str) -> tuple[int, bool]:
    try:
        axis, side = name.split("_")
        k = int(axis[1:]) - 1
        if axis[0] != "x" or side not in ("low", "high") or k < 0:
            raise ValueError
    except ValueError:
        raise ValueError(f"bad face name {name!r}; expected e.g. 'x1_low'") from None
    return k, side == "high"


def half_space_masks(grid_v: VelocityGrid, u_w, n):
    """``(inflow, outflow)`` boolean masks; tangent nodes belong to outflow."""
    c = (grid_v.v[0] - u_w[0]) * n[0] + (grid_v.v[1] - u_w[1]) * n[1]
    inflow = c < 0
    return inflow, ~inflow


def wall_density(grid_v: VelocityGrid, f_wall, u_w, T_w, n):
    """Density of the diffusive re-emission balancing the outgoing mass flux.

    ``f_wall`` may be a batch ``(..., N_v**2)``; ``T_w`` broadcasts against the
    batch.
    """
    T_w = np.asarray(T_w, dtype=float)
    if np.any(T_w <= 0):
        raise ValueError("wall temperature must be positive")
    c = (grid_v.v[0] - u_w[0]) * n[0] + (grid_v.v[1] - u_w[1]) * n[1]
    inflow = c < 0
    if not inflow.any() or inflow.all():
        raise ValueError("degenerate half-space mask: wall sees no inflow or no outflow nodes")
    du2 = (grid_v.v[0] - u_w[0]) ** 2 + (grid_v.v[1] - u_w[1]) ** 2
    E = np.exp(-du2 / (2.0 * T_w[..., None]))
    den = np.sum(np.where(inflow, c, 0.0) * E, axis=-1)
    num = np.asarray(f_wall, dtype=float) @ np.where(inflow, 0.0, c)
    return -num / den


@dataclass
class _Face:
    name: str
    direction: int
    high: bool
    kind: str
    normal: np.ndarray
    u_w: np.ndarray
    inflow: np.ndarray
    outflow: np.ndarray
    c_out: np.ndarray  # (v - u_w) . n on outflow nodes, zero elsewhere
    data: np.ndarray  # inflow Maxwellian (1, n_v) or wall Gaussians (n_cells or 1, n_v), masked to inflow
    den: np.ndarray | None  # diffusive: inflow flux of the unit-density Gaussian, (n_cells or 1,)


class BoundarySpec:
    """Per-face boundary data on a fixed pair of grids.

    ``faces`` maps face names to :class:`Inflow` or :class:`Diffusive`; every
    face of the spatial domain must be present.
    """

    def __init__(self, grid_x: SpatialGrid, grid_v: VelocityGrid, faces: dict):
        self.grid_x = grid_x
        self.grid_v = grid_v
        self.conditions = dict(faces)
        expected = {face_name(k, h) for k in range(grid_x.dim) for h in (False, True)}
        if set(faces) != expected:
            raise ValueError(f"boundary faces {sorted(faces)} do not match the domain faces {sorted(expected)}")
        self.faces = {}
        for name in sorted(faces):
            self.faces[name] = self._prepare(name, faces[name])

    def _prepare(self, name, cond) -> _Face:
        k, high = parse_face(name)
        gv = self.grid_v
        normal = np.zeros(2)
        normal[k] = 1.0 if high else -1.0
        n_cells = int(np.prod(self.grid_x.face_shape(k)))
        if isinstance(cond, Inflow):
            u_w = np.zeros(2)
            inflow, outflow = half_space_masks(gv, u_w, normal)
            data = maxwellian(gv, cond.rho, np.asarray(cond.u, dtype=float), cond.T)[None, :] * inflow
            den = None
            kind = "inflow"
        elif isinstance(cond, Diffusive):
            u_w = np.asarray(cond.u_w, dtype=float)
            if abs(u_w @ normal) > 0:
                raise ValueError(f"wall velocity on {name} must be tangential")
            inflow, outflow = half_space_masks(gv, u_w, normal)
            if not inflow.any() or inflow.all():
                raise ValueError(f"degenerate half-space mask on {name}")
            T_w = np.asarray(cond.T_w, dtype=float).reshape(-1)
            if T_w.size not in (1, n_cells):
                raise ValueError(f"{name}: T_w has {T_w.size} values for {n_cells} boundary cells")
            du2 = (gv.v[0] - u_w[0]) ** 2 + (gv.v[1] - u_w[1]) ** 2
            data = np.exp(-du2[None, :] / (2.0 * T_w[:, None])) * inflow
            c = (gv.v[0] - u_w[0]) * normal[0] + (gv.v[1] - u_w[1]) * normal[1]
            den = data @ c
            kind = "diffusive"
        else:
            raise TypeError(f"unknown boundary condition {cond!r}")
        c = (gv.v[0] - u_w[0]) * normal[0] + (gv.v[1] - u_w[1]) * normal[1]
        return _Face(name, k, high, kind, normal, u_w, inflow, outflow, np.where(outflow, c, 0.0), data, den)

    def face(self, name: str) -> _Face:
        return self.faces[name]

    def wall_density(self, name: str, f_outflow):
        fc = self.faces[name]
        if fc.kind != "diffusive":
            raise ValueError(f"{name} is not a diffusive wall")
        return -(np.asarray(f_outflow) @ fc.c_out) / fc.den

    def boundary_distribution(self, name: str, f_outflow, t: float = 0.0):
        """Full boundary distribution ``f^b`` from the outflow data at each face cell.

        ``f_outflow`` is ``(n_cells, N_v**2)`` (or a single slice).  Static
        data only: ``t`` is accepted for interface compatibility.
        """
        fc = self.faces[name]
        f_out = np.asarray(f_outflow, dtype=float)
        if fc.kind == "inflow":
            inflow_part = fc.data
        else:
            rho_w = self.wall_density(name, f_out)
            inflow_part = rho_w[..., None] * fc.data
        return inflow_part + f_out * fc.outflow

    def ghost_full(self, f, t: float = 0.0) -> dict:
        """Ghost slices for the full-tensor engine, keyed by face name."""
        out = {}
        for name, fc in self.faces.items():
            adj = face_values(self.grid_x, f, fc.direction, fc.high)
            shape = adj.shape
            fb = self.boundary_distribution(name, adj.reshape(-1, shape[-1]), t)
            out[name] = fb.reshape(shape)
        return out

    def project(self, V) -> "ProjectedBoundary":
        return ProjectedBoundary(self, V)

    def assemble_boundary_matrix(self, X, S, V, t: float = 0.0) -> np.ndarray:
        """Rows of ``f^b`` at every boundary cell, outflow halves from the low-rank state."""
        K = X @ S
        rows = []
        for name, fc in self.faces.items():
            adj = face_values(self.grid_x, K, fc.direction, fc.high)
            f_adj = adj.reshape(-1, K.shape[1]) @ V.T
            rows.append(self.boundary_distribution(name, f_adj, t))
        return np.concatenate(rows, axis=0)


class ProjectedBoundary:
    """Boundary data projected onto a fixed velocity basis ``V`` (``N_v**2 x r``)."""

    def __init__(self, spec: BoundarySpec, V):
        self.spec = spec
        w = spec.grid_v.weight
        self.rank = V.shape[1]
        self.out_proj = {}
        self.in_proj = {}
        self.flux = {}
        for name, fc in spec.faces.items():
            Vo = V * fc.outflow[:, None]
            self.out_proj[name] = (Vo.T @ V) * w
            self.in_proj[name] = (fc.data @ V) * w
            if fc.kind == "diffusive":
                self.flux[name] = fc.c_out @ V

    def ghost(self, name: str, K_interior) -> np.ndarray:
        """Ghost coefficients ``K_j = <f^b, V_j>`` from the interior coefficients at the face cells."""
        fc = self.spec.faces[name]
        K_int = np.asarray(K_interior, dtype=float)
        out = K_int @ self.out_proj[name]
        if fc.kind == "inflow":
            return out + self.in_proj[name][0]
        rho_w = -(K_int @ self.flux[name]) / fc.den
        return out + rho_w[..., None] * self.in_proj[name]

    def ghosts(self, grid_x: SpatialGrid, K) -> dict:
        out = {}
        for name, fc in self.spec.faces.items():
            adj = face_values(grid_x, K, fc.direction, fc.high)
            out[name] = self.ghost(name, adj)
        return out


def ghost_K_values(spec: BoundarySpec, face: str, V, K_interior) -> np.ndarray:
    return ProjectedBoundary(spec, V).ghost(face, K_interior)


def copy_ghosts(grid_x: SpatialGrid, field) -> dict:
    """Zero-gradient ghosts (no boundary data): every face copies its adjacent cells."""
    return {face_name(k, h): face_values(grid_x, field, k, h) for k in range(grid_x.dim) for h in (False, True)}
