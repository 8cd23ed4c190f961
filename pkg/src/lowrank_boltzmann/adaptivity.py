"""Rank growth from boundary data, rank truncation, and the adaptive time loop."""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .convergence import ErrorReport, adaptive_error, bound_holds, lowrank_error
from .lowrank import LowRankState, precompute_coefficients, step
from .spatial import weighted_qr

log = logging.getLogger(__name__)

BOUNDARY_GATE = 1e-10


@dataclass
class AugmentationReport:
    r_b: int
    r_before: int
    r_after: int
    sv_dropped: np.ndarray


@dataclass
class TruncationReport:
    r_before: int
    r_after: int
    dropped: np.ndarray  # discarded singular values
    drop_tol: float
    kept_largest_only: bool = False
    dropped_part: np.ndarray | None = None  # coefficient block of the discarded part in the new bases


def _boundary_directions(F_b, weight_v):
    """Weighted right singular vectors of ``F_b`` above the relative gate, plus the discarded values."""
    F_b = np.atleast_2d(np.asarray(F_b, dtype=float))
    if F_b.shape[0] == 1 or np.all(F_b == F_b[0]):
        # spatially homogeneous boundary: the single row is the only direction
        row = F_b[0]
        if not np.any(row):
            return np.zeros((F_b.shape[1], 0)), np.zeros(0)
        return row[:, None], np.zeros(0)
    b = np.sqrt(weight_v)
    _, s, wt = np.linalg.svd(F_b * b, full_matrices=False)
    keep = s >= BOUNDARY_GATE * s[0] if s[0] > 0 else np.zeros(s.shape, bool)
    return wt[keep].T / b, s[~keep]


def add_boundary_basis(state: LowRankState, F_b, rng_seed, grid_x, grid_v):
    """Enlarge both bases so the boundary data ``F_b`` (rows are velocity slices) is representable.

    The velocity basis gains the leading right singular directions of ``F_b``;
    the spatial basis gains as many seeded Gaussian columns.  The coupling
    matrix is zero-padded, so the represented function does not change.
    ``rng_seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    r = state.r
    Qb, sv_dropped = _boundary_directions(F_b, grid_v.weight)
    r_b = min(Qb.shape[1], grid_x.size - r, grid_v.size - r)
    if r_b <= 0:
        return state, AugmentationReport(0, r, r, sv_dropped)
    Qb = Qb[:, :r_b]
    rng = np.random.default_rng(rng_seed)
    Xh = rng.standard_normal((grid_x.size, r_b))
    Xx, Sx = weighted_qr(np.hstack([state.X, Xh]), grid_x.weight)
    Vv, Sv = weighted_qr(np.hstack([state.V, Qb]), grid_v.weight)
    S_hat = np.zeros((r + r_b, r + r_b))
    S_hat[:r, :r] = state.S
    S_new = Sx @ S_hat @ Sv.T
    new = LowRankState(Xx, S_new, Vv, state.time)
    return new, AugmentationReport(r_b, r, r + r_b, sv_dropped)


def drop_basis(state: LowRankState, drop_tol: float):
    """Truncate to the singular values of ``S`` that are at least ``drop_tol``.

    Rank never falls below one: if every value is below the tolerance the
    largest is kept and the report says so.
    """
    U, s, Qt = np.linalg.svd(state.S)
    keep = s >= drop_tol
    flagged = False
    if not keep.any():
        keep[0] = True
        flagged = True
        log.warning("all singular values below drop_tol=%.3e; keeping the largest", drop_tol)
    k = int(keep.sum())  # s is sorted, so the kept values form a prefix
    X = state.X @ U[:, :k]
    V = state.V @ Qt[:k].T
    dropped_part = (U[:, k:] * s[k:]) @ Qt[k:]
    new = LowRankState(X, np.diag(s[:k]), V, state.time)
    # dropped_part is expressed in the pre-truncation bases (X_new, V_new of the step)
    return new, TruncationReport(state.r, k, s[k:].copy(), float(drop_tol), flagged, dropped_part)


def drop_tol_controller(err_ada_prev: float | None, c: float = 0.2) -> float:
    """``c`` times the previous adaptive residual; zero before any residual exists."""
    if not 0.0 < c < 1.0:
        raise ValueError(f"drop-tolerance factor must lie in (0, 1), got {c}")
    if err_ada_prev is None:
        return 0.0
    return c * float(err_ada_prev)


@dataclass
class RankHistory:
    """Append-only per-step record of the adaptive run."""

    records: list = field(default_factory=list)
    wall: list = field(default_factory=list)

    COLUMNS = ("step", "time", "r", "r_prime", "err", "err_ada", "drop_tol")

    def append(self, report: ErrorReport, time: float, wall: float = 0.0):
        self.records.append((report.step, time, report.r, report.r_prime, report.err, report.final, report.drop_tol))
        self.wall.append(wall)

    def __len__(self):
        return len(self.records)

    @property
    def ranks(self) -> np.ndarray:
        return np.array([rec[3] for rec in self.records], dtype=int)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([rec[5] for rec in self.records])


@dataclass
class AdaptiveSettings:
    res_tol: float = 1e-6
    max_steps: int = 100000
    c: float = 0.2
    add_every: int = 1
    drop_every: int = 1
    seed: int = 0


@dataclass
class ControllerState:
    """Everything the adaptive loop carries between steps, so a run can resume exactly."""

    step: int = 0
    err_ada_prev: float | None = None
    halve: bool = False
    bound_violations: int = 0


class BoundViolation(AssertionError):
    pass


def run_adaptive(state: LowRankState, tables, grid_x, grid_v, dt: float, bc, settings: AdaptiveSettings,
                 history: RankHistory | None = None, ctrl: ControllerState | None = None, callback=None,
                 strict: bool = True):
    """Adaptive low-rank time loop until ``err_ada <= res_tol`` or ``max_steps``.

    Each step: augment from the boundary (every ``add_every`` steps), take a
    K/S/L step, truncate (every ``drop_every`` steps) and check the
    truncation bound.  Returns ``(state, history, ctrl, converged)``.
    """
    history = history if history is not None else RankHistory()
    ctrl = ctrl if ctrl is not None else ControllerState()
    converged = False
    while ctrl.step < settings.max_steps:
        n = ctrl.step
        t0 = _time.perf_counter()
        drop_tol = drop_tol_controller(ctrl.err_ada_prev, settings.c)
        if ctrl.halve:
            drop_tol *= 0.5
        if bc is not None and n % settings.add_every == 0:
            F_b = bc.assemble_boundary_matrix(state.X, state.S, state.V, state.time)
            state, _ = add_boundary_basis(state, F_b, [settings.seed, n], grid_x, grid_v)
        ws = precompute_coefficients(state, tables, grid_x, grid_v, bc)
        new, deltas = step(state, tables, grid_x, grid_v, dt, bc, ws)
        report = lowrank_error(deltas, new.X, state.V, grid_x, grid_v, step=n)
        if n % settings.drop_every == 0:
            trunc_state, trunc = drop_basis(new, drop_tol)
            report.r_prime = trunc.r_after
            report.err_ada = adaptive_error(report, deltas, new.X, state.V, new.V, trunc.dropped_part, grid_x, grid_v)
            new = trunc_state
        else:
            report.err_ada = report.err
        report.drop_tol = drop_tol
        if not bound_holds(report.err, report.err_ada, report.r, report.r_prime, drop_tol):
            ctrl.bound_violations += 1
            msg = (f"step {n}: |err - err_ada| = {abs(report.err - report.err_ada):.3e} exceeds "
                   f"sqrt({report.r - report.r_prime}) * {drop_tol:.3e}")
            if strict:
                raise BoundViolation(msg)
            log.error(msg)
        ctrl.halve = bool(settings.c * np.sqrt(report.r - report.r_prime) >= 1.0)
        if ctrl.halve:
            log.warning("step %d: c*sqrt(r-r') >= 1, halving the next drop tolerance", n)
        ctrl.err_ada_prev = report.err_ada
        ctrl.step = n + 1
        state = new
        history.append(report, state.time, _time.perf_counter() - t0)
        if callback is not None:
            callback(state, report, ctrl)
        if report.err_ada <= settings.res_tol:
            converged = True
            break
    return state, history, ctrl, converged
