"""Reference solver on the full ``(n_x, n_v)`` tensor with the same discretisation."""
from __future__ import annotations

import time as _time
from dataclasses import dataclass

import numpy as np

from .boundary import BoundarySpec, copy_ghosts, face_name
from .convergence import fulltensor_error
from .spatial import SpatialGrid, upwind_diff
from .velocity import CollisionTables, VelocityGrid, collide_self

DEFAULT_MEMORY_BUDGET = 8 * 2**30
CHUNK = 256


@dataclass
class FullTensorState:
    values: np.ndarray
    time: float = 0.0

    def copy(self) -> "FullTensorState":
        return FullTensorState(self.values.copy(), self.time)


def check_memory(grid_x: SpatialGrid, grid_v: VelocityGrid, budget: float = DEFAULT_MEMORY_BUDGET):
    """Refuse tensors whose working set (a few copies of ``f``) exceeds ``budget`` bytes."""
    need = 4 * grid_x.size * grid_v.size * 8
    if need > budget:
        raise MemoryError(f"full tensor needs about {need / 2**30:.1f} GiB, budget is {budget / 2**30:.1f} GiB")
    return need


def collision_term(tables: CollisionTables, f, chunk: int = CHUNK) -> np.ndarray:
    out = np.empty_like(f)
    for a in range(0, f.shape[0], chunk):
        blk = f[a:a + chunk]
        out[a:a + chunk] = collide_self(tables, blk)
    return out


def transport_term(f, grid_x: SpatialGrid, grid_v: VelocityGrid, bc: BoundarySpec | None, t: float = 0.0):
    """Upwind ``v . grad_x f`` with ghost slices from the boundary conditions."""
    ghosts = bc.ghost_full(f, t) if bc is not None else copy_ghosts(grid_x, f)
    out = np.zeros_like(f)
    for k in range(grid_x.dim):
        vk = grid_v.v[k]
        dp = upwind_diff(grid_x, f, k, "plus", ghosts[face_name(k, False)])
        dm = upwind_diff(grid_x, f, k, "minus", ghosts[face_name(k, True)])
        out += np.maximum(vk, 0.0) * dp + np.minimum(vk, 0.0) * dm
    return out


def full_step(state: FullTensorState, tables: CollisionTables, grid_x: SpatialGrid, grid_v: VelocityGrid,
              dt: float, bc: BoundarySpec | None = None) -> FullTensorState:
    """One forward-Euler upwind step of the full kinetic equation."""
    if dt < 0:
        raise ValueError("time step must be nonnegative")
    f = state.values
    if dt == 0:
        return FullTensorState(f.copy(), state.time)
    rhs = collision_term(tables, f) - transport_term(f, grid_x, grid_v, bc, state.time)
    return FullTensorState(f + dt * rhs, state.time + dt)


def run_to_steady(state: FullTensorState, tables, grid_x, grid_v, dt: float, bc, res_tol: float,
                  max_steps: int, history: list | None = None, start_step: int = 0, callback=None):
    """Iterate until the step residual is at most ``res_tol``.

    ``history`` collects ``(step, time, err)`` rows; returns
    ``(state, history, wall_times, converged)``.
    """
    history = history if history is not None else []
    wall = []
    converged = False
    n = start_step
    while n < max_steps:
        t0 = _time.perf_counter()
        new = full_step(state, tables, grid_x, grid_v, dt, bc)
        err = fulltensor_error(new.values, state.values, grid_x, grid_v)
        if not np.isfinite(err):
            raise FloatingPointError(f"step {n}: solution is no longer finite")
        state = new
        history.append((n, state.time, err))
        wall.append(_time.perf_counter() - t0)
        n += 1
        if callback is not None:
            callback(state, err, n)
        if err <= res_tol:
            converged = True
            break
    return state, history, wall, converged
