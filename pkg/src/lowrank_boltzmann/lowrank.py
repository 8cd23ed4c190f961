"""Factored solution ``f = X S V^T`` and the first-order projector-splitting step.

Both bases are orthonormal in the midpoint-rule inner products (cell volume
for ``X``, ``dv^2`` for ``V``).  Spatial transport is first-order upwind with
ghost coefficients taken from the projected boundary data, and the collision
term is expanded over the ``r^2`` pairs ``Q(V_m, V_n)``, which are evaluated
once per step and shared by the three substeps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundarySpec, ProjectedBoundary, copy_ghosts, face_name
from .spatial import SpatialGrid, upwind_diff, weighted_qr, weighted_svd
from .velocity import CollisionTables, Moments, VelocityGrid, collide_pairs


@dataclass
class LowRankState:
    X: np.ndarray
    S: np.ndarray
    V: np.ndarray
    time: float = 0.0

    @property
    def r(self) -> int:
        return self.S.shape[0]

    def copy(self) -> "LowRankState":
        return LowRankState(self.X.copy(), self.S.copy(), self.V.copy(), self.time)


@dataclass
class StepWorkspace:
    grid_x: SpatialGrid
    grid_v: VelocityGrid
    vplus: list  # per spatial dimension, <v_k^+ V_j V_l>
    vminus: list
    qpairs: np.ndarray  # (r, r, n_v): Q(V_m, V_n)
    vq: np.ndarray  # (r, r, r): <V_j Q(V_m, V_n)>, index [j, m, n]
    boundary: ProjectedBoundary | None
    xxx: np.ndarray | None = None  # (r, r, r): <X_i X_k X_l> with the updated X


@dataclass
class StepDeltas:
    dK: np.ndarray
    dS: np.ndarray
    dL: np.ndarray
    qr_condition: tuple = (1.0, 1.0)


def init_from_function(f0, grid_x: SpatialGrid, grid_v: VelocityGrid, rank: int | None = None,
                       tol: float | None = None) -> LowRankState:
    """Truncated weighted SVD of a full tensor ``(n_x, n_v)``.

    Keep ``rank`` terms, or all singular values ``>= tol * sigma_1`` when a
    relative tolerance is given instead.
    """
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != (grid_x.size, grid_v.size):
        raise ValueError(f"initial data has shape {f0.shape}, expected {(grid_x.size, grid_v.size)}")
    if not np.all(np.isfinite(f0)):
        raise ValueError("initial data is not finite")
    U, s, W = weighted_svd(f0, grid_x.weight, grid_v.weight)
    if rank is None:
        if tol is None:
            raise ValueError("give a rank or a tolerance")
        rank = max(1, int(np.sum(s >= tol * s[0]))) if s[0] > 0 else 1
    if rank < 1 or rank > min(f0.shape):
        raise ValueError(f"rank {rank} outside [1, {min(f0.shape)}]")
    return LowRankState(U[:, :rank].copy(), np.diag(s[:rank]), W[:, :rank].copy(), 0.0)


def reconstruct(state: LowRankState) -> np.ndarray:
    """Dense ``X S V^T``; for tests and diagnostics only."""
    return state.X @ state.S @ state.V.T


def lowrank_moments(state: LowRankState, grid_v: VelocityGrid) -> Moments:
    """Macroscopic fields at every cell from ``K = X S`` and the velocity integrals of ``V``."""
    w = grid_v.weight
    basis = np.stack([np.ones(grid_v.size), grid_v.v[0], grid_v.v[1], 0.5 * grid_v.speed2])
    m = (basis @ state.V) * w  # (4, r)
    ints = (state.X @ state.S) @ m.T
    rho, mom, energy = ints[:, 0], ints[:, 1:3], ints[:, 3]
    degenerate = rho <= 0
    safe = np.where(degenerate, 1.0, rho)
    u = mom / safe[:, None]
    T = (energy / safe - 0.5 * np.sum(u**2, axis=-1)) * (2.0 / grid_v.d)
    u = np.where(degenerate[:, None], np.nan, u)
    T = np.where(degenerate, np.nan, T)
    return Moments(rho, mom, energy, u, T, degenerate)


def velocity_transport_coefficients(V, grid_v: VelocityGrid, dim: int):
    w = grid_v.weight
    plus, minus = [], []
    for k in range(dim):
        vk = grid_v.v[k]
        plus.append((V.T * (np.maximum(vk, 0.0) * w)) @ V)
        minus.append((V.T * (np.minimum(vk, 0.0) * w)) @ V)
    return plus, minus


def triple_products(X, grid_x: SpatialGrid) -> np.ndarray:
    """``<X_i X_k X_l>_x`` as an ``(r, r, r)`` array."""
    return np.einsum("xi,xk,xl->ikl", X, X, X, optimize=True) * grid_x.weight


def precompute_coefficients(state: LowRankState, tables: CollisionTables, grid_x: SpatialGrid,
                            grid_v: VelocityGrid, bc: BoundarySpec | None = None) -> StepWorkspace:
    V = state.V
    plus, minus = velocity_transport_coefficients(V, grid_v, grid_x.dim)
    qpairs = collide_pairs(tables, V.T)
    vq = np.einsum("vj,mnv->jmn", V, qpairs, optimize=True) * grid_v.weight
    boundary = bc.project(V) if bc is not None else None
    return StepWorkspace(grid_x, grid_v, plus, minus, qpairs, vq, boundary)


def _ghosts(ws: StepWorkspace, K):
    if ws.boundary is None:
        return copy_ghosts(ws.grid_x, K)
    return ws.boundary.ghosts(ws.grid_x, K)


def _gradients(ws: StepWorkspace, K):
    """Upwind differences of every column of ``K`` with boundary-consistent ghosts."""
    g = _ghosts(ws, K)
    out = []
    for k in range(ws.grid_x.dim):
        dp = upwind_diff(ws.grid_x, K, k, "plus", g[face_name(k, False)])
        dm = upwind_diff(ws.grid_x, K, k, "minus", g[face_name(k, True)])
        out.append((dp, dm))
    return out


def _collision_K(vq, K):
    # sum_{m,n} <V_j Q(V_m,V_n)> K_m K_n, pointwise in x
    Y = np.einsum("xm,jmn->xjn", K, vq, optimize=True)
    return np.einsum("xjn,xn->xj", Y, K, optimize=True)


def _qr_condition(R) -> float:
    d = np.abs(np.diag(R))
    return float(d.min() / d.max()) if d.max() > 0 else 0.0


def k_step(state: LowRankState, ws: StepWorkspace, dt: float):
    """Forward Euler for ``K = X S`` with ``V`` frozen, then ``K = X_new S1``.

    Returns ``(X_new, S1, dK)``.
    """
    K = state.X @ state.S
    rhs = _collision_K(ws.vq, K)
    for k, (dp, dm) in enumerate(_gradients(ws, K)):
        rhs -= dp @ ws.vplus[k].T + dm @ ws.vminus[k].T
    K_new = K + dt * rhs
    X_new, S1 = weighted_qr(K_new, ws.grid_x.weight)
    ws.k_condition = _qr_condition(S1)
    return X_new, S1, K_new - K


def s_step(X_new, S1, ws: StepWorkspace, dt: float):
    """Backward-in-time Galerkin step for the coupling matrix; returns ``(S2, dS)``.

    Transport uses upwind differences of ``K = X_new S1`` (with ghosts), not
    of ``X_new``, because boundary data is only available for ``K``.
    """
    w = ws.grid_x.weight
    if ws.xxx is None:
        ws.xxx = triple_products(X_new, ws.grid_x)
    K1 = X_new @ S1
    update = np.zeros_like(S1)
    for k, (dp, dm) in enumerate(_gradients(ws, K1)):
        update += (X_new.T @ dp) * w @ ws.vplus[k].T + (X_new.T @ dm) * w @ ws.vminus[k].T
    Z = np.einsum("ikl,km->iml", ws.xxx, S1, optimize=True)
    Wt = np.einsum("iml,ln->imn", Z, S1, optimize=True)
    update -= np.einsum("imn,jmn->ij", Wt, ws.vq, optimize=True)
    S2 = S1 + dt * update
    return S2, S2 - S1


def l_step(X_new, S2, V, ws: StepWorkspace, dt: float):
    """Forward Euler for ``L = S2 V^T`` with ``X_new`` frozen, then ``L = S_new V_new^T``.

    Returns ``(V_new, S_new, dL)``.
    """
    w = ws.grid_x.weight
    gv = ws.grid_v
    if ws.xxx is None:
        ws.xxx = triple_products(X_new, ws.grid_x)
    L = V @ S2.T
    Kt = X_new @ S2
    rhs = np.zeros_like(L)
    for k, (dp, dm) in enumerate(_gradients(ws, Kt)):
        Hp = (X_new.T @ dp) * w
        Hm = (X_new.T @ dm) * w
        vk = gv.v[k]
        rhs -= np.maximum(vk, 0.0)[:, None] * (V @ Hp.T) + np.minimum(vk, 0.0)[:, None] * (V @ Hm.T)
    Z = np.einsum("imn,mp->ipn", ws.xxx, S2, optimize=True)
    Wt = np.einsum("ipn,nq->ipq", Z, S2, optimize=True)
    r = S2.shape[0]
    rhs += ws.qpairs.reshape(r * r, -1).T @ Wt.reshape(r, r * r).T
    L_new = L + dt * rhs
    V_new, R = weighted_qr(L_new, gv.weight)
    ws.l_condition = _qr_condition(R)
    return V_new, R.T, L_new - L


def step(state: LowRankState, tables: CollisionTables, grid_x: SpatialGrid, grid_v: VelocityGrid,
         dt: float, bc: BoundarySpec | None = None, ws: StepWorkspace | None = None):
    """One K/S/L step of length ``dt``; returns ``(new_state, deltas)``."""
    if ws is None:
        ws = precompute_coefficients(state, tables, grid_x, grid_v, bc)
    X_new, S1, dK = k_step(state, ws, dt)
    ws.xxx = triple_products(X_new, grid_x)
    S2, dS = s_step(X_new, S1, ws, dt)
    V_new, S_new, dL = l_step(X_new, S2, state.V, ws, dt)
    new = LowRankState(X_new, S_new, V_new, state.time + dt)
    return new, StepDeltas(dK, dS, dL, (ws.k_condition, ws.l_condition))
