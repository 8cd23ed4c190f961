"""Acceptance criteria 1-11.

Each test records one verdict line, printed in the terminal summary by
``conftest.py``.  The steady-state runs go through the CLI on the desk
configs in ``configs/`` and are shared between criteria.
"""
import os
import time

import numpy as np
import pytest

from conftest import record
from lowrank_boltzmann import io as lio
from lowrank_boltzmann.cli import EXIT_OK, main
from lowrank_boltzmann.config import parse_config
from lowrank_boltzmann.convergence import lowrank_error
from lowrank_boltzmann.lowrank import init_from_function, reconstruct, step
from lowrank_boltzmann.problems import bkw_solution, kinetic_fluxes, mott_smith, normal_shock, rankine_hugoniot
from lowrank_boltzmann.validate import dealiased_random
from lowrank_boltzmann.velocity import (build_velocity_grid, collide, collide_direct, maxwellian, moments,
                                        precompute_collision_tables)

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


class Run:
    """Artifacts of one CLI solve."""

    def __init__(self, out, code, seconds):
        self.out, self.code, self.seconds = out, code, seconds

    def csv(self, name):
        return lio.read_csv(os.path.join(self.out, name))

    def profiles(self):
        _, cols, data = self.csv("profiles.csv")
        return {c: data[:, i] for i, c in enumerate(cols)}

    def history(self):
        _, cols, data = self.csv("history.csv")
        return {c: data[:, i] for i, c in enumerate(cols)}

    def report(self):
        with open(os.path.join(self.out, "report.txt")) as fh:
            rows = [line.split(None, 1) for line in fh if not line.startswith("#")]
        return {k: v.strip() for k, v in rows}

    def state(self):
        return lio.checkpoint_read(os.path.join(self.out, "checkpoint.lrb"))[0]


_RUNS = {}


def solve(tmp_factory, name, *args):
    key = (name,) + args
    if key not in _RUNS:
        out = str(tmp_factory.mktemp(name.replace(".", "_")))
        t0 = time.perf_counter()
        code = main(["solve", os.path.join(CONFIGS, name + ".cfg"), "--out", out, *args])
        _RUNS[key] = Run(out, code, time.perf_counter() - t0)
    return _RUNS[key]


@pytest.fixture(scope="session")
def m14(tmp_path_factory):
    """Mach 1.4 desk run with both engines from the same initial data."""
    run = solve(tmp_path_factory, "normal_shock_m1.4_desk", "--engine", "both")
    return (Run(os.path.join(run.out, "lowrank"), run.code, run.seconds),
            Run(os.path.join(run.out, "fulltensor"), run.code, run.seconds), run)


def plateau(ranks, fraction=0.25):
    tail = ranks[int(len(ranks) * (1 - fraction)):]
    return int(tail.max() - tail[0]) if len(tail) else 0, int(ranks.max())


def test_criterion_01_collision_oracle():
    g = build_velocity_grid(1.5, 8)
    t = precompute_collision_tables(g)
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(5):
        a, b = dealiased_random(g, rng, 2)
        worst = max(worst, np.abs(collide(t, a, b) - collide_direct(g, a, b)).max())
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 1.0
    record(1, ok, f"max |collide - direct| = {worst:.2e} (< 1e-12), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_02_conservation():
    g = build_velocity_grid(7.86, 32)
    t = precompute_collision_tables(g)
    f = 0.6 * maxwellian(g, 1.0, np.array([0.5, 0.0]), 0.8) + 0.4 * maxwellian(g, 1.0, np.array([-0.3, 0.2]), 0.9)
    mf, mq = moments(g, f), moments(g, collide(t, f, f))
    cons = max(abs(mq.rho) / mf.rho, np.abs(mq.momentum).max() / mf.rho, abs(mq.energy) / mf.energy)
    M = maxwellian(g, 1.0, np.array([0.2, 0.1]), 1.0)
    eq = np.abs(collide(t, M, M)).max() / M.max()
    ok = cons < 1e-6 and eq < 1e-6
    record(2, ok, f"moment defect {cons:.2e}, equilibrium residual {eq:.2e} (both < 1e-6)")
    assert ok


def test_criterion_03_bkw(tmp_path_factory):
    run = solve(tmp_path_factory, "bkw_relaxation")
    cfg = parse_config(os.path.join(CONFIGS, "bkw_relaxation.cfg"))
    f = lio.checkpoint_read(os.path.join(run.out, "checkpoint.lrb"))[0]
    exact = bkw_solution(cfg.grid_v, f.time, cfg.problem.kernel_constant)
    err = np.linalg.norm(f.values[0] - exact) / np.linalg.norm(exact)
    ok = run.code == EXIT_OK and abs(f.time - 2.0) < 1e-9 and err < 5e-3 and run.seconds < 60
    record(3, ok, f"relative L2 error at t = {f.time:.3f}: {err:.2e} (< 5e-3), {run.seconds:.1f} s")
    assert ok


def test_criterion_04_error_formula():
    pc = normal_shock(1.4, n_x=16, N_v=8, L_v=13.11)
    gx, gv = pc.grid_x, pc.grid_v
    tables = precompute_collision_tables(gv)
    bc = pc.boundary()
    st = init_from_function(pc.initial_distribution(), gx, gv, rank=6)
    dt = 0.3 * gx.dx[0] / gv.L_v
    worst = 0.0
    for n in range(20):
        new, d = step(st, tables, gx, gv, dt, bc)
        rep = lowrank_error(d, new.X, st.V, gx, gv, step=n)
        diff = reconstruct(new) - reconstruct(st)
        ref = np.sqrt(np.sum(diff * diff) * gx.weight * gv.weight)
        worst = max(worst, abs(rep.err - ref))
        st = new
    ok = worst < 1e-10
    record(4, ok, f"max |err - reconstruction| over 20 steps = {worst:.2e} (< 1e-10)")
    assert ok


def test_criterion_05_adaptive_bound(m14):
    lr = m14[0]
    h = lr.history()
    r, rp, err, ada, tol = h["r"], h["r_prime"], h["err"], h["err_ada"], h["drop_tol"]
    gap = np.abs(err - ada) - np.sqrt(r - rp) * tol
    violations = int(np.sum(gap > 1e-12 * np.maximum(err, ada)))
    in_loop = int(lr.report()["bound_violations"])
    ok = len(r) >= 2000 and violations == 0 and in_loop == 0
    record(5, ok, f"{len(r)} steps, {violations} violations in history, {in_loop} in loop")
    assert ok


def test_criterion_06_engine_agreement(m14):
    lr, ft, both = m14
    cfg = parse_config(os.path.join(CONFIGS, "normal_shock_m1.4_desk.cfg"))
    a, b = lr.profiles(), ft.profiles()
    rel = {k: np.linalg.norm(a[k] - b[k]) / np.linalg.norm(b[k]) for k in ("rho", "u1", "T")}
    lo, hi, mono = np.inf, -np.inf, True
    for p in (a, b):
        for k, sign in (("rho_hat", 1), ("u_hat", -1), ("T_hat", 1)):
            lo, hi = min(lo, p[k].min()), max(hi, p[k].max())
            mono &= bool(np.all(sign * np.diff(p[k]) >= 0))
    # the conserved fluxes are the kinetic ones, int v_1 (1, v_1, |v|^2) f dv
    spread = 0.0
    for f in (reconstruct(lr.state()), ft.state().values):
        F = kinetic_fluxes(cfg.grid_v, f)
        mean = F.mean(axis=1, keepdims=True)
        spread = max(spread, float(np.max(np.abs(F - mean) / np.abs(mean))))
    ok = (max(rel.values()) < 5e-3 and lo >= -1e-3 and hi <= 1 + 1e-3 and mono and spread < 0.01
          and both.code == EXIT_OK)
    record(6, ok, "rel L2 rho/u/T " + "/".join(f"{rel[k]:.1e}" for k in ("rho", "u1", "T"))
           + f" (< 5e-3), normalized range [{lo:.1e}, 1{hi - 1:+.1e}] (within 1e-3), monotone {mono}, "
           f"flux spread {spread:.1e} (< 1e-2), both converged {both.code == EXIT_OK}")
    assert ok


def test_criterion_07_rank_plateau(m14, tmp_path_factory):
    lr = m14[0]
    growth, rmax = plateau(lr.history()["r_prime"].astype(int))
    ff = solve(tmp_path_factory, "fourier_flow_desk")
    fgrowth, frmax = plateau(ff.history()["r_prime"].astype(int))
    ok = growth == 0 and rmax <= 20 and fgrowth == 0 and frmax <= 15
    record(7, ok, f"Mach 1.4: growth over final 25% = {growth}, max rank {rmax} (<= 20); "
           f"Fourier: growth {fgrowth}, max rank {frmax} (<= 15)")
    assert ok


def test_criterion_08_mott_smith(tmp_path_factory):
    worst_res, worst_lim = 0.0, 0.0
    for mach, L_v in ((1.4, 13.11), (3.8, 20.97), (6.5, 34.08)):
        sc = rankine_hugoniot(mach)
        ms = mott_smith(sc, precompute_collision_tables(build_velocity_grid(L_v, 32)))
        x = np.linspace(-60, 60, 2401)
        worst_res = max(worst_res, np.abs(ms.ode_residual(x)).max())
        worst_lim = max(worst_lim, abs(ms.density_ratio(-1e6) - 1), abs(ms.density_ratio(1e6) - sc.rho_R / sc.rho_L))
    run = solve(tmp_path_factory, "normal_shock_m6.5_desk")
    rho_hat = run.profiles()["rho_hat"]
    mono = bool(np.all(np.diff(rho_hat) >= 0))
    bracket = rho_hat.min() >= -1e-3 and rho_hat.max() <= 1 + 1e-3
    ok = worst_res < 1e-10 and worst_lim < 1e-12 and mono and bracket
    record(8, ok, f"ODE residual {worst_res:.1e} (< 1e-10), limit error {worst_lim:.1e} (< 1e-12), "
           f"Mach 6.5 density monotone {mono}, in [{rho_hat.min():.1e}, 1{rho_hat.max() - 1:+.1e}]")
    assert ok


def test_criterion_09_weak_shock_spectra(m14, tmp_path_factory):
    ratios = {}
    for mach, run in ((1.05, solve(tmp_path_factory, "normal_shock_m1.05_desk")), (1.4, m14[0]),
                      (3.8, solve(tmp_path_factory, "normal_shock_m3.8_desk"))):
        s = np.linalg.svd(run.state().S, compute_uv=False)
        ratios[mach] = s[4] / s[0] if s.size > 4 else 0.0
    ok = ratios[1.05] < ratios[1.4] < ratios[3.8]
    record(9, ok, "sigma5/sigma1 at M = 1.05, 1.4, 3.8: " + ", ".join(f"{ratios[m]:.2e}" for m in (1.05, 1.4, 3.8)))
    assert ok


def _per_call(N_v, repeats=200):
    g = build_velocity_grid(7.86, N_v)
    t = precompute_collision_tables(g)
    f = maxwellian(g, 1.0, np.array([0.3, 0.0]), 1.0)
    collide(t, f, f)
    best = np.inf
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            collide(t, f, f)
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def test_criterion_10_complexity():
    ratio = _per_call(32) / _per_call(16)
    pc = normal_shock(1.4, n_x=20, N_v=8)
    gx, gv = pc.grid_x, pc.grid_v
    tables = precompute_collision_tables(gv)
    counts = []
    for r in (1, 3, 5):
        st = init_from_function(pc.initial_distribution(), gx, gv, rank=r)
        before = tables.stats["calls"]
        step(st, tables, gx, gv, 0.01, pc.boundary())
        counts.append(tables.stats["calls"] - before)
    ok = ratio < 6 and counts == [1, 9, 25]
    record(10, ok, f"per-call time ratio N_v 32/16 = {ratio:.2f} (< 6), calls per step at r = 1, 3, 5: {counts}")
    assert ok


def test_criterion_11_reproducibility(tmp_path_factory):
    outs = []
    for i in range(2):
        out = str(tmp_path_factory.mktemp(f"repro{i}"))
        main(["solve", os.path.join(CONFIGS, "normal_shock_m1.4_desk.cfg"), "--out", out, "--max-steps", "300",
              "--seed", "11"])
        outs.append(out)
    names = ["profiles.csv", "history.csv", "report.txt", "checkpoint.lrb"]
    same = []
    for name in names:
        with open(os.path.join(outs[0], name), "rb") as a, open(os.path.join(outs[1], name), "rb") as b:
            same.append(a.read() == b.read())
    ok = all(same)
    record(11, ok, "byte-identical: " + ", ".join(f"{n} {s}" for n, s in zip(names, same)))
    assert ok
