"""Command line front end: ``solve``, ``analyze shock`` and ``validate collision``.

Exit codes: 0 converged (or reached ``t_end``), 2 configuration error,
3 not converged within ``max_steps``, 4 I/O or checkpoint error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import __version__
from . import io as lio
from ._threads import THREADS_ENV
from .adaptivity import AdaptiveSettings, ControllerState, RankHistory, run_adaptive
from .config import ConfigError, RunConfig, parse_config, time_step
from .fulltensor import FullTensorState, check_memory, run_to_steady
from .lowrank import init_from_function, lowrank_moments
from .problems import mott_smith, normalized_profiles
from .velocity import moments, precompute_collision_tables

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_IO = 0, 2, 3, 4
PROGRESS_EVERY = 1000

log = logging.getLogger("lowrank_boltzmann")


@dataclasses.dataclass
class EngineResult:
    engine: str
    state: object
    fields: dict
    converged: bool
    steps: int
    final_err: float
    ranks: np.ndarray | None = None


def _fields(m) -> dict:
    return {"rho": m.rho, "u": m.u, "T": m.T}


def _steps_budget(cfg: RunConfig, dt: float) -> int:
    if cfg.t_end > 0:
        return min(cfg.max_steps, int(round(cfg.t_end / dt)))
    return cfg.max_steps


def write_profiles(out, cfg: RunConfig, fields: dict):
    gx = cfg.grid_x
    coords = gx.coordinates()
    names = [f"x{k + 1}" for k in range(gx.dim)] if gx.dim > 1 else ["x"]
    cols = names + ["rho", "u1", "u2", "T"]
    data = [coords, fields["rho"][:, None], fields["u"], fields["T"][:, None]]
    sc = cfg.problem.shock
    if sc is not None:
        nrm = normalized_profiles(fields, sc)
        cols += ["rho_hat", "u_hat", "T_hat"]
        data += [nrm["rho"][:, None], nrm["u"][:, None], nrm["T"][:, None]]
    table = np.hstack(data)
    lio.write_csv(os.path.join(out, "profiles.csv"), cols, table, cfg.config_hash)
    if gx.dim == 2:
        grid = table.reshape(gx.shape + (table.shape[1],))
        mid1, mid2 = gx.shape[0] // 2, gx.shape[1] // 2
        lio.write_csv(os.path.join(out, "profile_cut_x1.csv"), cols, grid[:, mid2], cfg.config_hash,
                      [f"cut along x1 at x2 = {gx.centers(1)[mid2]!r}"])
        lio.write_csv(os.path.join(out, "profile_cut_x2.csv"), cols, grid[mid1, :], cfg.config_hash,
                      [f"cut along x2 at x1 = {gx.centers(0)[mid1]!r}"])


def run_lowrank(cfg: RunConfig, out: str, tables, bc, dt: float, resume: str | None = None) -> EngineResult:
    gx, gv = cfg.grid_x, cfg.grid_v
    history = RankHistory()
    ctrl = ControllerState()
    if resume:
        state, header, hist = lio.checkpoint_read(resume, gx, gv)
        if header["kind"] != "lowrank":
            raise lio.CheckpointError(f"{resume}: holds a {header['kind']} state, not a low-rank one")
        c = header["controller"]
        ctrl = ControllerState(header["step"], c.get("err_ada_prev"), bool(c.get("halve", False)),
                               int(c.get("bound_violations", 0)))
        if hist is not None:
            history.records = [(int(r[0]), r[1], int(r[2]), int(r[3]), r[4], r[5], r[6]) for r in hist]
            history.wall = [0.0] * len(history.records)
    else:
        f0 = cfg.problem.initial_distribution()
        if cfg.init_rank > 0:
            state = init_from_function(f0, gx, gv, rank=min(cfg.init_rank, *f0.shape))
        else:
            state = init_from_function(f0, gx, gv, tol=cfg.init_tol)
    settings = AdaptiveSettings(res_tol=cfg.res_tol, max_steps=_steps_budget(cfg, dt), c=cfg.c,
                                add_every=cfg.add_every, drop_every=cfg.drop_every, seed=cfg.seed)
    if cfg.t_end > 0:
        settings.res_tol = -1.0

    def checkpoint(st, ctl, name):
        lio.checkpoint_write(os.path.join(out, name), st, gx, gv, ctl.step,
                             {"err_ada_prev": ctl.err_ada_prev, "halve": ctl.halve,
                              "bound_violations": ctl.bound_violations},
                             history.records, cfg.config_hash)

    def callback(st, report, ctl):
        if ctl.step % PROGRESS_EVERY == 0:
            log.info("lowrank step %d  err_ada %.3e  rank %d", ctl.step, report.final, st.r)
        if cfg.checkpoint_every and ctl.step % cfg.checkpoint_every == 0:
            checkpoint(st, ctl, f"checkpoint_{ctl.step:08d}.lrb")

    state, history, ctrl, converged = run_adaptive(state, tables, gx, gv, dt, bc, settings, history, ctrl, callback)
    if cfg.t_end > 0:
        converged = ctrl.step >= settings.max_steps
    checkpoint(state, ctrl, "checkpoint.lrb")
    lio.write_csv(os.path.join(out, "history.csv"), RankHistory.COLUMNS, history.records, cfg.config_hash)
    lio.write_csv(os.path.join(out, "timing.csv"), ["step", "wall_seconds"],
                  [(rec[0], w) for rec, w in zip(history.records, history.wall)], cfg.config_hash,
                  ["wall-clock only; not reproducible"])
    fields = _fields(lowrank_moments(state, gv))
    write_profiles(out, cfg, fields)
    ranks = history.ranks
    final = history.records[-1][5] if history.records else float("nan")
    lines = [
        "engine lowrank",
        f"converged {converged}",
        f"steps {ctrl.step}",
        f"time {state.time!r}",
        f"final_err_ada {final!r}",
        f"rank_final {state.r}",
        f"rank_min {int(ranks.min()) if ranks.size else state.r}",
        f"rank_max {int(ranks.max()) if ranks.size else state.r}",
        f"bound_violations {ctrl.bound_violations}",
    ]
    lio.write_text(os.path.join(out, "report.txt"), lines, cfg.config_hash)
    return EngineResult("lowrank", state, fields, converged, ctrl.step, final, ranks)


def run_fulltensor(cfg: RunConfig, out: str, tables, bc, dt: float, resume: str | None = None) -> EngineResult:
    gx, gv = cfg.grid_x, cfg.grid_v
    check_memory(gx, gv)
    history = []
    start = 0
    if resume:
        state, header, hist = lio.checkpoint_read(resume, gx, gv)
        if header["kind"] != "fulltensor":
            raise lio.CheckpointError(f"{resume}: holds a {header['kind']} state, not a full tensor")
        start = header["step"]
        if hist is not None:
            history = [(int(r[0]), r[1], r[2]) for r in hist]
    else:
        state = FullTensorState(cfg.problem.initial_distribution())
    res_tol = -1.0 if cfg.t_end > 0 else cfg.res_tol
    budget = _steps_budget(cfg, dt)

    def callback(st, err, n):
        if n % PROGRESS_EVERY == 0:
            log.info("fulltensor step %d  err %.3e", n, err)
        if cfg.checkpoint_every and n % cfg.checkpoint_every == 0:
            lio.checkpoint_write(os.path.join(out, f"checkpoint_{n:08d}.lrb"), st, gx, gv, n, {}, history,
                                 cfg.config_hash)

    state, history, wall, converged = run_to_steady(state, tables, gx, gv, dt, bc, res_tol, budget, history, start,
                                                    callback)
    steps = history[-1][0] + 1 if history else start
    if cfg.t_end > 0:
        converged = steps >= budget
    lio.checkpoint_write(os.path.join(out, "checkpoint.lrb"), state, gx, gv, steps, {}, history, cfg.config_hash)
    rows = [(n, t, 0, 0, e, e, 0.0) for n, t, e in history]
    lio.write_csv(os.path.join(out, "history.csv"), RankHistory.COLUMNS, rows, cfg.config_hash,
                  ["full tensor: rank columns are 0 and err_ada repeats err"])
    lio.write_csv(os.path.join(out, "timing.csv"), ["step", "wall_seconds"],
                  [(row[0], w) for row, w in zip(history[-len(wall):], wall)] if wall else [], cfg.config_hash,
                  ["wall-clock only; not reproducible"])
    fields = _fields(moments(gv, state.values))
    write_profiles(out, cfg, fields)
    final = history[-1][2] if history else float("nan")
    lines = ["engine fulltensor", f"converged {converged}", f"steps {steps}", f"time {state.time!r}",
             f"final_err {final!r}"]
    lio.write_text(os.path.join(out, "report.txt"), lines, cfg.config_hash)
    return EngineResult("fulltensor", state, fields, converged, steps, final)


def write_diff(out, cfg: RunConfig, a: EngineResult, b: EngineResult):
    gx = cfg.grid_x
    coords = gx.coordinates()
    names = [f"x{k + 1}" for k in range(gx.dim)] if gx.dim > 1 else ["x"]
    d = [a.fields["rho"] - b.fields["rho"], a.fields["u"][:, 0] - b.fields["u"][:, 0],
         a.fields["u"][:, 1] - b.fields["u"][:, 1], a.fields["T"] - b.fields["T"]]
    table = np.hstack([coords, np.stack(d, axis=1)])
    lio.write_csv(os.path.join(out, "diff.csv"), names + ["d_rho", "d_u1", "d_u2", "d_T"], table, cfg.config_hash,
                  [f"{a.engine} minus {b.engine}"])


def run(cfg: RunConfig, out: str, resume: str | None = None) -> int:
    """Execute the configured engine(s), write all artifacts and return the exit code."""
    os.makedirs(out, exist_ok=True)
    tables = precompute_collision_tables(cfg.grid_v, cfg.problem.M, cfg.problem.kernel_constant)
    bc = cfg.problem.boundary()
    dt = time_step(cfg)
    if cfg.engine == "lowrank":
        results = [run_lowrank(cfg, out, tables, bc, dt, resume)]
    elif cfg.engine == "fulltensor":
        results = [run_fulltensor(cfg, out, tables, bc, dt, resume)]
    else:
        if resume:
            raise ConfigError(["--resume needs a single engine"])
        dirs = [os.path.join(out, e) for e in ("lowrank", "fulltensor")]
        for d in dirs:
            os.makedirs(d, exist_ok=True)
        results = [run_lowrank(cfg, dirs[0], tables, bc, dt), run_fulltensor(cfg, dirs[1], tables, bc, dt)]
        write_diff(out, cfg, results[0], results[1])
    for r in results:
        print(f"{r.engine}: converged={r.converged} steps={r.steps} final_err={r.final_err:.3e}")
    return EXIT_OK if all(r.converged for r in results) else EXIT_NOT_CONVERGED


def analyze_shock(cfg: RunConfig, out: str | None) -> int:
    sc = cfg.problem.shock
    if sc is None:
        raise ConfigError([f"{cfg.path}: analyze shock needs a normal_shock configuration"])
    tables = precompute_collision_tables(cfg.grid_v, cfg.problem.M, cfg.problem.kernel_constant)
    ms = mott_smith(sc, tables)
    fl = sc.fluxes([sc.rho_L, sc.rho_R], [sc.u_L, sc.u_R], [sc.T_L, sc.T_R])
    print(f"Mach {sc.M_L!r}  gamma {sc.gamma!r}")
    print(f"upstream   rho {sc.rho_L:.12g}  u {sc.u_L:.12g}  T {sc.T_L:.12g}")
    print(f"downstream rho {sc.rho_R:.12g}  u {sc.u_R:.12g}  T {sc.T_R:.12g}")
    for name, (a, b) in zip(("mass", "momentum", "energy"), fl):
        print(f"{name:9s} flux  upstream {a:.12g}  downstream {b:.12g}")
    print(f"Mott-Smith collision integral {ms.alpha:.12g}  rate beta {ms.beta:.12g}")
    if out:
        os.makedirs(out, exist_ok=True)
        x = cfg.grid_x.centers(0)
        a = ms.a(x)
        rho = ms.density_ratio(x) * sc.rho_L
        table = np.stack([x, a, rho, (rho - sc.rho_L) / (sc.rho_R - sc.rho_L)], axis=1)
        lio.write_csv(os.path.join(out, "mott_smith.csv"), ["x", "a", "rho", "rho_hat"], table, cfg.config_hash,
                      [f"alpha {ms.alpha!r}", f"beta {ms.beta!r}"])
    return EXIT_OK


def validate_collision() -> int:
    from .validate import collision_battery

    ok = True
    for name, passed, detail in collision_battery():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowrank-boltzmann",
                                description="Adaptive low-rank and full-tensor steady Boltzmann solvers.",
                                epilog=f"FFT threads default to 1; set {THREADS_ENV} to change it.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress every 1000 steps and controller warnings")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run a configuration to steady state")
    s.add_argument("config")
    s.add_argument("--engine", choices=("lowrank", "fulltensor", "both"))
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory (overrides [output] dir)")
    s.add_argument("--max-steps", type=int)
    s.add_argument("--resume", help="continue from a checkpoint written by an earlier run")

    a = sub.add_parser("analyze", help="analytic references")
    a.add_argument("what", choices=("shock",))
    a.add_argument("config")
    a.add_argument("--out", help="also write mott_smith.csv here")

    v = sub.add_parser("validate", help="self-checks")
    v.add_argument("what", choices=("collision",))
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    errors = []
    if args.engine:
        cfg.engine = args.engine
    if args.seed is not None:
        if args.seed < 0:
            errors.append("--seed must be nonnegative")
        cfg.seed = args.seed
    if args.max_steps is not None:
        if args.max_steps < 1:
            errors.append("--max-steps must be positive")
        cfg.max_steps = args.max_steps
    if errors:
        raise ConfigError(errors)
    return cfg


def default_out(cfg: RunConfig) -> str:
    stem = os.path.splitext(os.path.basename(cfg.path))[0] or "run"
    return cfg.out_dir or os.path.join("runs", stem)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            return validate_collision()
        cfg = parse_config(args.config)
        if args.command == "analyze":
            return analyze_shock(cfg, args.out)
        cfg = _apply_overrides(cfg, args)
        return run(cfg, args.out or default_out(cfg), args.resume)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except lio.CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MemoryError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
