"""Benchmark setups and analytic references.

Shock jump conditions, the Mott-Smith bimodal profile, the BKW relaxation
solution for 2D Maxwell molecules and the singular-value diagnostic live
here, together with constructors for the five problem kinds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundarySpec, Diffusive, Inflow, face_name
from .spatial import SpatialGrid, build_spatial_grid, weighted_svd
from .velocity import CollisionTables, VelocityGrid, build_velocity_grid, collide_batch, maxwellian

PROBLEM_KINDS = ("normal_shock", "fourier_flow", "lid_cavity", "thermal_cavity", "homogeneous_relaxation")


@dataclass(frozen=True)
class ShockConditions:
    M_L: float
    rho_L: float
    u_L: float
    T_L: float
    rho_R: float
    u_R: float
    T_R: float
    d: int = 2

    @property
    def gamma(self) -> float:
        return (self.d + 2) / self.d

    def fluxes(self, rho, u, T):
        """Mass, momentum and energy fluxes ``rho u``, ``rho u^2 + rho T``, ``rho u (u^2 + (d+2) T)``."""
        rho, u, T = (np.asarray(a, dtype=float) for a in (rho, u, T))
        return np.stack([rho * u, rho * u**2 + rho * T, rho * u * (u**2 + (self.d + 2) * T)])

    def upstream(self):
        return self.rho_L, (self.u_L, 0.0), self.T_L

    def downstream(self):
        return self.rho_R, (self.u_R, 0.0), self.T_R


def kinetic_fluxes(grid_v: VelocityGrid, f) -> np.ndarray:
    """Fluxes ``int v_1 (1, v_1, |v|^2) f dv`` of each slice, shape ``(3, ...)``.

    For a Maxwellian these equal :meth:`ShockConditions.fluxes`; unlike the
    macroscopic form they stay constant through a steady shock.
    """
    v1, v2 = grid_v.v
    phi = np.stack([v1, v1 * v1, v1 * (v1 * v1 + v2 * v2)])
    return np.moveaxis(np.asarray(f, dtype=float) @ phi.T * grid_v.weight, -1, 0)


def rankine_hugoniot(M_L: float, rho_L: float = 1.0, T_L: float = 1.0, d: int = 2) -> ShockConditions:
    """Downstream state of a steady normal shock from the upstream Mach number (gas constant 1)."""
    if not M_L >= 1:
        raise ValueError(f"upstream Mach number must be >= 1, got {M_L}")
    if rho_L <= 0 or T_L <= 0:
        raise ValueError("upstream density and temperature must be positive")
    gamma = (d + 2) / d
    m2 = M_L * M_L
    u_L = M_L * np.sqrt(gamma * T_L)
    rho_R = rho_L * (d + 1) * m2 / (m2 + d)
    u_R = u_L * (m2 + d) / ((d + 1) * m2)
    T_R = T_L * ((d + 2) * m2 - 1) * (m2 + d) / ((d + 1) ** 2 * m2)
    return ShockConditions(float(M_L), float(rho_L), float(u_L), float(T_L), float(rho_R), float(u_R), float(T_R), d)


def _blend(x, left, right, alpha):
    return (np.tanh(alpha * x) + 1.0) / 2.0 * (right - left) + left


def shock_initial_fields(sc: ShockConditions, grid_x: SpatialGrid, alpha: float = 0.5) -> dict:
    """Smooth tanh transition from the upstream to the downstream state centred at ``x = 0``."""
    x = grid_x.centers(0)
    u = np.zeros((x.size, 2))
    u[:, 0] = _blend(x, sc.u_L, sc.u_R, alpha)
    return {"rho": _blend(x, sc.rho_L, sc.rho_R, alpha), "u": u, "T": _blend(x, sc.T_L, sc.T_R, alpha)}


@dataclass(frozen=True)
class MottSmithProfile:
    sc: ShockConditions
    alpha: float  # collision moment integral
    beta: float

    def a(self, x):
        # the small branch is computed from exp(-|z|) and the other as its complement,
        # so large |beta x| cannot overflow and a(x) + a(-x) = 1 holds in floating point
        z = self.beta * np.asarray(x, dtype=float)
        e = np.exp(-np.abs(z))
        small = e / (1.0 + e)
        return np.where(z > 0, small, 1.0 - small)

    def da(self, x):
        a = self.a(x)
        return -self.beta * a * (1.0 - a)

    def density_ratio(self, x):
        """``rho(x) / rho_L``; the bimodal density is ``a rho_L + (1 - a) rho_R``."""
        a = self.a(x)
        return a + (1.0 - a) * self.sc.rho_R / self.sc.rho_L

    def ode_residual(self, x):
        sc = self.sc
        a = self.a(x)
        return (sc.d - 1) * sc.rho_L * sc.u_L * (sc.T_L - sc.T_R) * self.da(x) + self.alpha * a * (1.0 - a)


def mott_smith(sc: ShockConditions, tables: CollisionTables, grid_v: VelocityGrid | None = None) -> MottSmithProfile:
    """Mott-Smith weight ``a(x) = 1 / (exp(beta x) + 1)`` with the ``v_1^2`` moment closure.

    The collision integral is evaluated with the spectral operator on the
    tables' grid, so its accuracy is that of the velocity discretisation.
    """
    grid_v = grid_v or tables.grid
    if sc.M_L <= 1 or sc.T_R == sc.T_L:
        raise ValueError("Mott-Smith profile needs a genuine shock (M_L > 1)")
    fL = maxwellian(grid_v, sc.rho_L, np.array([sc.u_L, 0.0]), sc.T_L)
    fR = maxwellian(grid_v, sc.rho_R, np.array([sc.u_R, 0.0]), sc.T_R)
    q = collide_batch(tables, np.stack([fL, fR]), np.stack([fR, fL])).sum(axis=0)
    alpha = float(q @ grid_v.v[0] ** 2 * grid_v.weight)
    beta = alpha / ((sc.d - 1) * sc.rho_L * sc.u_L * (sc.T_L - sc.T_R))
    if not np.isfinite(beta):
        raise ValueError("Mott-Smith rate is not finite")
    return MottSmithProfile(sc, alpha, float(beta))


def normalized_profiles(fields: dict, sc: ShockConditions) -> dict:
    """Rescale so the upstream state maps to ``(0, 1, 0)`` and the downstream one to ``(1, 0, 1)``."""
    drho, du, dT = sc.rho_R - sc.rho_L, sc.u_L - sc.u_R, sc.T_R - sc.T_L
    if min(abs(drho), abs(du), abs(dT)) < 1e-14:
        raise ValueError("normalisation undefined without a jump (M_L = 1)")
    u1 = np.asarray(fields["u"])
    u1 = u1[..., 0] if u1.ndim > 1 else u1
    return {
        "rho": (np.asarray(fields["rho"]) - sc.rho_L) / drho,
        "u": (u1 - sc.u_R) / du,
        "T": (np.asarray(fields["T"]) - sc.T_L) / dT,
    }


def bkw_rate(kernel_constant: float = 1.0 / (2.0 * np.pi)) -> float:
    """Relaxation rate of the 2D BKW solution for a constant kernel ``b``."""
    return np.pi * kernel_constant / 4.0


def bkw_solution(grid_v: VelocityGrid, t: float, kernel_constant: float = 1.0 / (2.0 * np.pi),
                 t0: float = 0.0) -> np.ndarray:
    """Exact relaxation solution for 2D Maxwell molecules (unit density and temperature).

    ``f = exp(-|v|^2 / 2K) / (2 pi K^2) * (2K - 1 + (1 - K) |v|^2 / 2K)`` with
    ``K = 1 - exp(-lam (t + t0)) / 2``.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    K = 1.0 - 0.5 * np.exp(-bkw_rate(kernel_constant) * (t + t0))
    v2 = grid_v.speed2
    return np.exp(-v2 / (2.0 * K)) / (2.0 * np.pi * K * K) * (2.0 * K - 1.0 + (1.0 - K) * v2 / (2.0 * K))


def weak_shock_rank_diagnostic(solution, grid_x: SpatialGrid | None = None, grid_v: VelocityGrid | None = None):
    """Weighted singular values of a steady solution, largest first.

    ``solution`` is a dense ``(n_x, n_v)`` tensor (grids required) or a
    low-rank state, whose singular values are those of ``S``.
    """
    if hasattr(solution, "S"):
        return np.linalg.svd(solution.S, compute_uv=False)
    if grid_x is None or grid_v is None:
        raise ValueError("dense input needs both grids for the weighted norms")
    _, s, _ = weighted_svd(solution, grid_x.weight, grid_v.weight)
    return s


# --------------------------------------------------------------------------
# benchmark constructors


@dataclass
class ProblemConfig:
    kind: str
    grid_x: SpatialGrid
    grid_v: VelocityGrid
    faces: dict | None  # face name -> Inflow / Diffusive, or None for zero-gradient ends
    initial: dict  # rho (n_x,), u (n_x, 2), T (n_x,)
    res_tol: float
    M: int = 8
    kernel_constant: float = 1.0 / (2.0 * np.pi)
    shock: ShockConditions | None = None
    f0: np.ndarray | None = None  # overrides the local Maxwellian of ``initial``
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.faces is not None:
            expected = {face_name(k, h) for k in range(self.grid_x.dim) for h in (False, True)}
            if set(self.faces) != expected:
                raise ValueError(f"boundary faces {sorted(self.faces)} do not match a {self.grid_x.dim}D domain")

    def boundary(self) -> BoundarySpec | None:
        if self.faces is None:
            return None
        return BoundarySpec(self.grid_x, self.grid_v, self.faces)

    def initial_distribution(self) -> np.ndarray:
        if self.f0 is not None:
            return np.array(self.f0, dtype=float)
        ini = self.initial
        return maxwellian(self.grid_v, ini["rho"], ini["u"], ini["T"])


def _uniform(grid_x, rho, u, T):
    n = grid_x.size
    return {"rho": np.full(n, float(rho)), "u": np.tile(np.asarray(u, dtype=float), (n, 1)), "T": np.full(n, float(T))}


def normal_shock(mach=1.4, n_x=1000, bounds=(-30.0, 30.0), L_v=13.11, N_v=32, res_tol=3e-7,
                 alpha=0.5, **kw) -> ProblemConfig:
    """1D normal shock with the upstream state entering at the left and the downstream one at the right."""
    sc = rankine_hugoniot(mach)
    gx = build_spatial_grid([bounds], [n_x])
    gv = build_velocity_grid(L_v, N_v)
    faces = {
        "x1_low": Inflow(sc.rho_L, (sc.u_L, 0.0), sc.T_L),
        "x1_high": Inflow(sc.rho_R, (sc.u_R, 0.0), sc.T_R),
    }
    return ProblemConfig("normal_shock", gx, gv, faces, shock_initial_fields(sc, gx, alpha), res_tol,
                         shock=sc, extras={"alpha": alpha}, **kw)


def fourier_flow(n_x=200, bounds=(0.0, 2.0), L_v=7.86, N_v=32, T_low=1.0, T_high=1.2, res_tol=2e-7,
                 **kw) -> ProblemConfig:
    """Gas at rest between two diffusive walls held at different temperatures."""
    gx = build_spatial_grid([bounds], [n_x])
    gv = build_velocity_grid(L_v, N_v)
    faces = {"x1_low": Diffusive((0.0, 0.0), T_low), "x1_high": Diffusive((0.0, 0.0), T_high)}
    return ProblemConfig("fourier_flow", gx, gv, faces, _uniform(gx, 1.0, (0.0, 0.0), 1.0), res_tol, **kw)


def lid_cavity(n_x=100, side=0.5, L_v=7.86, N_v=32, lid_speed=1.0, res_tol=2e-7, u0=(1.0, 1.0), **kw) -> ProblemConfig:
    """Square cavity whose top wall slides in the ``x_1`` direction."""
    gx = build_spatial_grid([(0.0, side), (0.0, side)], [n_x, n_x])
    gv = build_velocity_grid(L_v, N_v)
    still = Diffusive((0.0, 0.0), 1.0)
    faces = {"x1_low": still, "x1_high": still, "x2_low": still, "x2_high": Diffusive((lid_speed, 0.0), 1.0)}
    return ProblemConfig("lid_cavity", gx, gv, faces, _uniform(gx, 1.0, u0, 1.0), res_tol, **kw)


def wall_ramp(s, T_start=1.0, T_end=1.2, ramp_start=0.0, ramp_end=1.0):
    """Piecewise-linear wall temperature over the normalised wall coordinate ``s`` in ``[0, 1]``.

    Constant ``T_start`` before ``ramp_start``, constant ``T_end`` after
    ``ramp_end``, linear in between.
    """
    if not 0.0 <= ramp_start < ramp_end <= 1.0:
        raise ValueError("need 0 <= ramp_start < ramp_end <= 1")
    return np.interp(s, [ramp_start, ramp_end], [T_start, T_end])


def thermal_cavity(n_x=100, side=2.0, L_v=6.55, N_v=32, T_cold=1.0, T_hot=1.2, ramp_start=0.0, ramp_end=1.0,
                   res_tol=2e-7, **kw) -> ProblemConfig:
    """Square cavity at rest; the walls ``x_2 = 0`` and ``x_2 = side`` carry a temperature ramp along ``x_1``."""
    gx = build_spatial_grid([(0.0, side), (0.0, side)], [n_x, n_x])
    gv = build_velocity_grid(L_v, N_v)
    T_wall = wall_ramp(gx.centers(0) / side, T_cold, T_hot, ramp_start, ramp_end)
    ramp = Diffusive((0.0, 0.0), T_wall)
    cold = Diffusive((0.0, 0.0), T_cold)
    faces = {"x1_low": cold, "x1_high": cold, "x2_low": ramp, "x2_high": ramp}
    return ProblemConfig("thermal_cavity", gx, gv, faces, _uniform(gx, 1.0, (0.0, 0.0), 1.0), res_tol,
                         extras={"ramp_start": ramp_start, "ramp_end": ramp_end}, **kw)


def homogeneous_relaxation(L_v=7.86, N_v=32, res_tol=0.0, kernel_constant=1.0 / (2.0 * np.pi), **kw) -> ProblemConfig:
    """Single cell, no transport, BKW initial data; validates the collision operator in time."""
    gx = build_spatial_grid([(0.0, 1.0)], [1])
    gv = build_velocity_grid(L_v, N_v)
    f0 = bkw_solution(gv, 0.0, kernel_constant)[None, :]
    return ProblemConfig("homogeneous_relaxation", gx, gv, None, _uniform(gx, 1.0, (0.0, 0.0), 1.0), res_tol,
                         kernel_constant=kernel_constant, f0=f0, **kw)
