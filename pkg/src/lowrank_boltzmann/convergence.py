"""Step residuals for both engines and the steady-state stopping rule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import SpatialGrid
from .velocity import VelocityGrid


@dataclass
class ErrorReport:
    """L2 size of one step's change ``f^{n+1} - f^n``.

    ``parts`` holds the squared norms of the K, S and L increments followed by
    the three cross terms; their sum is ``err**2``.
    """

    err: float
    parts: tuple
    err_ada: float | None = None
    step: int = 0
    r: int = 0
    r_prime: int = 0
    drop_tol: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def final(self) -> float:
        return self.err if self.err_ada is None else self.err_ada


def _check(deltas, X_new, V_old):
    r = deltas.dS.shape[0]
    if deltas.dS.shape != (r, r) or deltas.dK.shape[1] != r or deltas.dL.shape[1] != r:
        raise ValueError("increment shapes are inconsistent with one rank")
    if X_new.shape != deltas.dK.shape or V_old.shape != deltas.dL.shape:
        raise ValueError(f"basis shapes {X_new.shape}, {V_old.shape} do not match the increments "
                         f"{deltas.dK.shape}, {deltas.dL.shape}")


def lowrank_error(deltas, X_new, V_old, grid_x: SpatialGrid, grid_v: VelocityGrid, step: int = 0) -> ErrorReport:
    """Residual of a K/S/L step from the factor increments alone.

    With ``L^n = V^n S2^T`` the change splits as
    ``sum_j dK_j V^n_j + sum_ij X_i dS_ij V^n_j + sum_i X_i dL_i``, and the
    norm follows from the increments' Gram products without forming ``f``.
    """
    _check(deltas, X_new, V_old)
    wx, wv = grid_x.weight, grid_v.weight
    dK, dS, dL = deltas.dK, deltas.dS, deltas.dL
    kk = float(np.sum(dK * dK) * wx)
    ss = float(np.sum(dS * dS))
    ll = float(np.sum(dL * dL) * wv)
    KX = (X_new.T @ dK) * wx  # [i, j] = <dK_j, X_i>
    LV = (dL.T @ V_old) * wv  # [i, j] = <dL_i, V_j>
    I = 2.0 * float(np.sum(KX * dS))
    II = 2.0 * float(np.sum(LV * dS))
    III = 2.0 * float(np.sum(KX * LV))
    total = kk + ss + ll + I + II + III
    scale = kk + ss + ll
    if total < -1e-12 * max(scale, 1e-300):
        raise FloatingPointError(f"negative squared residual {total:.3e} (parts sum {scale:.3e})")
    r = dS.shape[0]
    return ErrorReport(float(np.sqrt(max(total, 0.0))), (kk, ss, ll, I, II, III), step=step, r=r, r_prime=r)


def adaptive_error(report: ErrorReport, deltas, X_new, V_old, V_new, dropped, grid_x: SpatialGrid,
                   grid_v: VelocityGrid) -> float:
    """Residual of the step once the truncated part is removed from the new state.

    ``dropped`` is the ``r x r`` coefficient block ``A`` of the discarded part
    ``D = X_new A V_new^T``, so ``err_ada^2 = err^2 - 2 <E, D> + ||A||_F^2``
    where ``E`` is the step's change.  Nothing of size ``n_x * n_v`` is formed.
    """
    A = np.asarray(dropped, dtype=float)
    if not np.any(A):
        return report.err
    wv = grid_v.weight
    GV = (V_old.T @ V_new) * wv  # <V_j^n, V_k^{n+1}>
    PK = (X_new.T @ deltas.dK) * grid_x.weight
    coupling = (PK + deltas.dS) @ GV + (deltas.dL.T @ V_new) * wv
    ed = float(np.sum(A * coupling))
    total = report.err**2 - 2.0 * ed + float(np.sum(A * A))
    return float(np.sqrt(max(total, 0.0)))


def fulltensor_error(f_new, f_old, grid_x: SpatialGrid, grid_v: VelocityGrid) -> float:
    f_new = np.asarray(f_new)
    f_old = np.asarray(f_old)
    if f_new.shape != f_old.shape:
        raise ValueError(f"shape mismatch {f_new.shape} vs {f_old.shape}")
    d = f_new - f_old
    return float(np.sqrt(np.sum(d * d) * grid_x.weight * grid_v.weight))


def stopping_rule(report, res_tol: float, engine: str = "lowrank") -> str:
    """``"converged"`` once the (adaptive) residual reaches ``res_tol``, else ``"continue"``."""
    if engine == "lowrank":
        value = report.final if isinstance(report, ErrorReport) else float(report)
    elif engine == "fulltensor":
        value = report.err if isinstance(report, ErrorReport) else float(report)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return "converged" if value <= res_tol else "continue"


def bound_holds(err: float, err_ada: float, r: int, r_prime: int, drop_tol: float, slack: float = 1e-12) -> bool:
    """Triangle-inequality bound ``|err - err_ada| <= sqrt(r - r') drop_tol`` with round-off slack."""
    gap = abs(err - err_ada)
    return gap <= np.sqrt(max(r - r_prime, 0)) * drop_tol + slack * max(err, err_ada, 1e-300)
