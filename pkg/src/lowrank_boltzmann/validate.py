"""Self-checks of the collision operator, shared by the CLI and the tests."""
from __future__ import annotations

import time

import numpy as np

from .problems import bkw_solution
from .velocity import (build_velocity_grid, collide, collide_direct, maxwellian, moments,
                       precompute_collision_tables)


def dealiased_random(grid, rng, n=1):
    """Smooth random slices supported inside the dealiasing disc."""
    v2 = grid.speed2
    S = grid.dealias_radius
    bump = np.where(v2 < S * S, np.exp(-1.0 / np.maximum(1.0 - v2 / (S * S), 1e-300) + 1.0), 0.0)
    return rng.random((n, grid.size)) * bump


def collision_battery(seed: int = 0):
    """Yield ``(name, passed, detail)`` for each check."""
    rng = np.random.default_rng(seed)
    g8 = build_velocity_grid(1.5, 8)
    t8 = precompute_collision_tables(g8)
    g, h = dealiased_random(g8, rng, 2)
    t0 = time.perf_counter()
    diff = np.abs(collide(t8, g, h) - collide_direct(g8, g, h)).max()
    yield "spectral vs direct sum (N_v=8)", diff < 1e-12, f"max diff {diff:.2e} in {time.perf_counter() - t0:.2f}s"

    g32 = build_velocity_grid(7.86, 32)
    t32 = precompute_collision_tables(g32)
    f = 0.6 * maxwellian(g32, 1.0, np.array([0.5, 0.0]), 0.8) + 0.4 * maxwellian(g32, 1.0, np.array([-0.3, 0.2]), 0.9)
    q = collide(t32, f, f)
    m, mq = moments(g32, f), moments(g32, q)
    rel = max(abs(mq.rho) / m.rho, np.abs(mq.momentum).max() / m.rho, abs(mq.energy) / m.energy)
    yield "conservation (N_v=32)", rel < 1e-6, f"max relative moment {rel:.2e}"

    M = maxwellian(g32, 1.0, np.array([0.3, -0.2]), 1.1)
    res = np.abs(collide(t32, M, M)).max() / M.max()
    yield "equilibrium residual", res < 1e-6, f"|Q(M,M)|/|M| = {res:.2e}"

    dt = 1e-4
    fb = bkw_solution(g32, 1.0)
    dfdt = (bkw_solution(g32, 1.0 + dt) - bkw_solution(g32, 1.0 - dt)) / (2 * dt)
    err = np.linalg.norm(collide(t32, fb, fb) - dfdt) / np.linalg.norm(dfdt)
    yield "BKW time derivative", err < 1e-2, f"relative error {err:.2e}"
