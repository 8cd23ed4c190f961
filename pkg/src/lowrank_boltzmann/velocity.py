"""Velocity lattice, Maxwellians, moments and the 2D Maxwell-molecule collision operator.

The collision operator uses the fast Fourier spectral method in Carleman form:
both relative displacements ``x = v' - v`` and ``y = v_*' - v`` are truncated to
``[-R, R]`` along a pair of perpendicular directions, the direction is sampled
with ``M`` uniform angles on the half circle, and the resulting weights are
separable so that the gain term becomes a sum of ``M`` pointwise products of
filtered functions.  Spectral products are evaluated on a zero-padded
``3N/2`` grid so that the truncated convolution sum is computed exactly,
without index aliasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from ._threads import fft_workers

DIM = 2


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Uniform endpoint lattice ``v_k = -L_v + k * dv`` on ``[-L_v, L_v)^2``."""

    L_v: float
    N_v: int

    def __post_init__(self):
        if not np.isfinite(self.L_v) or self.L_v <= 0:
            raise ValueError(f"L_v must be positive, got {self.L_v}")
        if int(self.N_v) != self.N_v or self.N_v < 4 or self.N_v % 2:
            raise ValueError(f"N_v must be an even integer >= 4, got {self.N_v}")
        object.__setattr__(self, "N_v", int(self.N_v))
        nodes = -self.L_v + np.arange(self.N_v) * self.dv
        v1, v2 = np.meshgrid(nodes, nodes, indexing="ij")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "v", np.stack([v1.ravel(), v2.ravel()]))

    d = DIM

    @property
    def dv(self) -> float:
        return 2.0 * self.L_v / self.N_v

    @property
    def weight(self) -> float:
        """Midpoint quadrature weight of one velocity node."""
        return self.dv**2

    @property
    def size(self) -> int:
        return self.N_v**2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N_v, self.N_v)

    @property
    def speed2(self) -> np.ndarray:
        return self.v[0] ** 2 + self.v[1] ** 2

    @property
    def dealias_radius(self) -> float:
        return 2.0 * self.L_v / (3.0 + np.sqrt(2.0))

    def inner(self, f, g):
        """Weighted inner product over the last axis."""
        return np.sum(f * g, axis=-1) * self.weight

    def describe(self) -> dict:
        return {"L_v": float(self.L_v), "N_v": int(self.N_v)}

    def __eq__(self, other):
        return isinstance(other, VelocityGrid) and self.describe() == other.describe()

    def __hash__(self):
        return hash((self.L_v, self.N_v))

    def __repr__(self):
        return f"VelocityGrid(L_v={self.L_v!r}, N_v={self.N_v})"


def build_velocity_grid(L_v: float, N_v: int) -> VelocityGrid:
    return VelocityGrid(float(L_v), N_v)


def maxwellian(grid: VelocityGrid, rho, u, T) -> np.ndarray:
    """Sample ``rho / (2 pi T) exp(-|v - u|^2 / (2T))`` on the lattice.

    ``rho``, ``u`` and ``T`` may carry leading batch dimensions (``u`` has a
    trailing axis of length 2); the result has shape ``batch + (N_v**2,)``.
    """
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(T <= 0):
        raise ValueError("temperature must be positive")
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    du1 = grid.v[0] - u[..., 0, None]
    du2 = grid.v[1] - u[..., 1, None]
    T_ = T[..., None]
    return rho[..., None] / (2.0 * np.pi * T_) * np.exp(-(du1**2 + du2**2) / (2.0 * T_))


@dataclass
class Moments:
    rho: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    u: np.ndarray
    T: np.ndarray
    degenerate: np.ndarray


def moments(grid: VelocityGrid, f) -> Moments:
    """Density, momentum, energy, bulk velocity and temperature of ``f``.

    Works on a single slice or on a batch ``(..., N_v**2)``.  Where the
    density is not positive, ``u`` and ``T`` are NaN and ``degenerate`` is set.
    """
    f = np.asarray(f, dtype=float)
    w = grid.weight
    rho = f.sum(axis=-1) * w
    mom = np.stack([f @ grid.v[0], f @ grid.v[1]], axis=-1) * w
    energy = 0.5 * (f @ grid.speed2) * w
    degenerate = rho <= 0
    safe = np.where(degenerate, 1.0, rho)
    u = mom / safe[..., None]
    T = (energy / safe - 0.5 * np.sum(u**2, axis=-1)) * (2.0 / grid.d)
    u = np.where(degenerate[..., None], np.nan, u)
    T = np.where(degenerate, np.nan, T)
    return Moments(rho, mom, energy, u, T, degenerate)


# --------------------------------------------------------------------------
# collision operator


@dataclass(frozen=True, eq=False)
class CollisionTables:
    grid: VelocityGrid
    M: int
    kernel_constant: float
    R: float
    dealias_radius: float
    pad: int
    gain_star: np.ndarray  # (M, P, P//2+1): phi_R(l . e_perp) applied to the v_* slot
    gain_self: np.ndarray  # (M, P, P//2+1): phi_R(m . e) applied to the v slot
    loss: np.ndarray  # (P, P//2+1): sum_p phi_R(l . e_p) phi_R(l . e_p_perp)
    prefactor: float
    stats: dict = field(default_factory=lambda: {"calls": 0}, compare=False)

    @property
    def spectral_weights(self):
        return (self.gain_star, self.gain_self, self.loss)


def _kernel_phi(R: float, L: float, s):
    # integral of exp(i pi rho s / L) over rho in [-R, R]
    return 2.0 * R * np.sinc(R * np.asarray(s, dtype=float) / L)


def _directions(M: int) -> np.ndarray:
    theta = np.arange(M) * np.pi / M
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def precompute_collision_tables(grid: VelocityGrid, M: int = 8, kernel_constant: float = 1.0 / (2.0 * np.pi)) -> CollisionTables:
    """Spectral weights for ``collide``; depends only on the grid, ``M`` and ``B``."""
    if int(M) != M or M < 4:
        raise ValueError(f"M must be an integer >= 4, got {M}")
    if not kernel_constant > 0:
        raise ValueError("kernel_constant must be positive")
    M = int(M)
    N = grid.N_v
    P = 3 * N // 2
    L = grid.L_v
    S = grid.dealias_radius
    R = np.sqrt(2.0) * S

    k1 = np.fft.fftfreq(P, 1.0 / P)
    k2 = np.arange(P // 2 + 1, dtype=float)
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    keep = (np.abs(K1) <= N // 2 - 1) & (K2 <= N // 2 - 1)

    e = _directions(M)
    along = K1[None] * e[:, 0, None, None] + K2[None] * e[:, 1, None, None]
    perp = -K1[None] * e[:, 1, None, None] + K2[None] * e[:, 0, None, None]
    phi_along = _kernel_phi(R, L, along)
    phi_perp = _kernel_phi(R, L, perp)

    gain_star = np.where(keep, phi_perp, 0.0)
    gain_self = np.where(keep, phi_along, 0.0)
    loss = np.where(keep, (phi_along * phi_perp).sum(axis=0), 0.0)
    # Carleman kernel of constant-B 2D Maxwell molecules is 2B; angle weight pi/M
    prefactor = 2.0 * kernel_constant * np.pi / M
    for a in (gain_star, gain_self, loss):
        a.setflags(write=False)
    return CollisionTables(grid, M, float(kernel_constant), float(R), float(S), P,
                           gain_star, gain_self, loss, float(prefactor))


def _embed(tables: CollisionTables, f) -> np.ndarray:
    """Half spectrum of ``f`` (Nyquist dropped), zero-padded to the P grid."""
    N = tables.grid.N_v
    P = tables.pad
    h = N // 2
    spec = sfft.rfft2(f.reshape(f.shape[:-1] + (N, N)), norm="forward", workers=fft_workers())
    out = np.zeros(f.shape[:-1] + (P, P // 2 + 1), dtype=complex)
    out[..., :h, :h] = spec[..., :h, :h]
    out[..., P - h + 1:, :h] = spec[..., N - h + 1:, :h]
    return out


def _restrict(tables: CollisionTables, values) -> np.ndarray:
    """Truncate padded-grid real values to the retained modes on the N grid."""
    N = tables.grid.N_v
    P = tables.pad
    h = N // 2
    w = fft_workers()
    spec = sfft.rfft2(values, norm="forward", workers=w)
    out = np.zeros(values.shape[:-2] + (N, N // 2 + 1), dtype=complex)
    out[..., :h, :h] = spec[..., :h, :h]
    out[..., N - h + 1:, :h] = spec[..., P - h + 1:, :h]
    res = sfft.irfft2(out, s=(N, N), norm="forward", workers=w)
    return res.reshape(values.shape[:-2] + (N * N,))


def _synth(tables: CollisionTables, spec) -> np.ndarray:
    P = tables.pad
    return sfft.irfft2(spec, s=(P, P), norm="forward", workers=fft_workers())


def _check_slices(tables: CollisionTables, *arrays):
    n = tables.grid.size
    for a in arrays:
        if a.shape[-1] != n:
            raise ValueError(f"slice length {a.shape[-1]} does not match the collision grid ({n} nodes)")


def collide_batch(tables: CollisionTables, g, h) -> np.ndarray:
    """``Q(g[b], h[b])`` for every leading index ``b``; inputs ``(..., N_v**2)``."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_slices(tables, g, h)
    g, h = np.broadcast_arrays(g, h)
    batch = g.shape[:-1]
    g2 = g.reshape((-1, g.shape[-1]))
    h2 = h.reshape((-1, h.shape[-1]))
    gs = _embed(tables, g2)
    hs = _embed(tables, h2)
    a = _synth(tables, gs[:, None] * tables.gain_star)
    b = _synth(tables, hs[:, None] * tables.gain_self)
    gain = np.einsum("bpxy,bpxy->bxy", a, b)
    loss = _synth(tables, gs * tables.loss) * _synth(tables, hs)
    out = _restrict(tables, tables.prefactor * (gain - loss))
    tables.stats["calls"] += g2.shape[0]
    return out.reshape(batch + (g.shape[-1],))


def collide_self(tables: CollisionTables, f) -> np.ndarray:
    """``Q(f[b], f[b])`` for a batch, using half the transforms of :func:`collide_batch`.

    With ``M`` even, rotating a direction by a quarter turn gives another
    direction of the set, so the filtered transforms for the ``v_*`` slot are
    a permutation of those for the ``v`` slot.
    """
    f = np.asarray(f, dtype=float)
    _check_slices(tables, f)
    M = tables.M
    if M % 2:
        return collide_batch(tables, f, f)
    batch = f.shape[:-1]
    f2 = f.reshape((-1, f.shape[-1]))
    fs = _embed(tables, f2)
    a = _synth(tables, fs[:, None] * tables.gain_self)  # (b, p, X, Y)
    gain = 2.0 * np.einsum("bpxy,bpxy->bxy", a[:, : M // 2], a[:, M // 2:])
    loss = _synth(tables, fs * tables.loss) * _synth(tables, fs)
    out = _restrict(tables, tables.prefactor * (gain - loss))
    tables.stats["calls"] += f2.shape[0]
    return out.reshape(batch + (f.shape[-1],))


def collide(tables: CollisionTables, g, h) -> np.ndarray:
    """Spectral approximation of the bilinear collision operator ``Q(g, h)``.

    ``g`` occupies the post/pre-collisional partner slot ``v_*`` and ``h`` the
    slot of the evaluation velocity ``v``.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.ndim != 1 or h.ndim != 1:
        raise ValueError("collide expects single velocity slices; use collide_batch")
    return collide_batch(tables, g, h)


def collide_pairs(tables: CollisionTables, G, H=None) -> np.ndarray:
    """All pairwise ``Q(G[m], H[n])`` as an array ``(m, n, N_v**2)``.

    The filtered transforms of every basis function are formed once, so ``r``
    inputs cost ``O(r M)`` transforms plus ``r^2`` pointwise products.  Each
    pair counts as one collide call.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    H = G if H is None else np.atleast_2d(np.asarray(H, dtype=float))
    _check_slices(tables, G, H)
    gs = _embed(tables, G)
    hs = gs if H is G else _embed(tables, H)
    a = _synth(tables, gs[:, None] * tables.gain_star)  # (m, p, X, Y)
    b = _synth(tables, hs[:, None] * tables.gain_self)  # (n, p, X, Y)
    P = tables.pad
    nx = P * P
    a2 = a.reshape(a.shape[0], a.shape[1], nx).transpose(2, 0, 1)  # (X*Y, m, p)
    b2 = b.reshape(b.shape[0], b.shape[1], nx).transpose(2, 1, 0)  # (X*Y, p, n)
    gain = np.matmul(a2, b2).transpose(1, 2, 0).reshape(G.shape[0], H.shape[0], P, P)
    c = _synth(tables, gs * tables.loss)
    fvals = _synth(tables, hs)
    gain -= c[:, None] * fvals[None, :]
    out = _restrict(tables, tables.prefactor * gain)
    tables.stats["calls"] += G.shape[0] * H.shape[0]
    return out


# --------------------------------------------------------------------------
# direct oracle


def collide_direct(grid: VelocityGrid, g, h, M: int = 8, kernel_constant: float = 1.0 / (2.0 * np.pi),
                   allow_large: bool = False) -> np.ndarray:
    """Evaluate the same truncated spectral sum as ``collide`` term by term.

    Uses explicit DFT sums and the double sum over mode pairs ``l + m = k``;
    cost ``O(N_v^4 M)``, so grids with ``N_v > 16`` are refused unless
    ``allow_large`` is set.
    """
    N = grid.N_v
    if N > 16 and not allow_large:
        raise ValueError(f"collide_direct refuses N_v={N} > 16; pass allow_large=True to override")
    g = np.asarray(g, dtype=float).reshape(N, N)
    h = np.asarray(h, dtype=float).reshape(N, N)
    L = grid.L_v
    R = np.sqrt(2.0) * grid.dealias_radius
    ks = np.arange(-(N // 2) + 1, N // 2)
    j = np.arange(N)
    E = np.exp(-2j * np.pi * np.outer(ks, j) / N) / N
    g_hat = E @ g @ E.T
    h_hat = E @ h @ E.T

    nk = len(ks)
    l1, l2 = np.meshgrid(ks, ks, indexing="ij")
    l1 = l1.ravel().astype(float)
    l2 = l2.ravel().astype(float)
    e = _directions(M)
    prefactor = 2.0 * kernel_constant * np.pi / M

    gf = g_hat.ravel()
    hf = h_hat.ravel()
    q_hat = np.zeros(nk * nk, dtype=complex)
    lo, hi = ks[0], ks[-1]
    for kk in range(nk * nk):
        k1v, k2v = l1[kk], l2[kk]
        m1 = k1v - l1
        m2 = k2v - l2
        ok = (m1 >= lo) & (m1 <= hi) & (m2 >= lo) & (m2 <= hi)
        li = np.nonzero(ok)[0]
        mi = ((m1[ok] - lo) * nk + (m2[ok] - lo)).astype(int)
        beta = np.zeros(len(li))
        for p in range(M):
            c, s = e[p]
            l_along = l1[li] * c + l2[li] * s
            l_perp = -l1[li] * s + l2[li] * c
            m_along = m1[ok] * c + m2[ok] * s
            beta += (_kernel_phi(R, L, l_perp) * _kernel_phi(R, L, m_along)
                     - _kernel_phi(R, L, l_along) * _kernel_phi(R, L, l_perp))
        q_hat[kk] = prefactor * np.sum(gf[li] * hf[mi] * beta)
    q_hat = q_hat.reshape(nk, nk)
    F = np.exp(2j * np.pi * np.outer(j, ks) / N)
    return (F @ q_hat @ F.T).real.ravel()
