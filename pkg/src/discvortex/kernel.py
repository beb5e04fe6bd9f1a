"""Green's function, image-form Biot-Savart kernels and the key-lemma split.

Velocity convention: omega = -curl u, so a positive blob spins clockwise.
``bs_kernel`` is the bracket of the image-form Biot-Savart law *without*
the 1/(2 pi) normalization, i.e. ``-2 pi * grad_perp_x G``; ``velocity``
applies the 1/(2 pi) so that u = -grad_perp (integral of G omega).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from numpy.typing import ArrayLike

from . import _kernels
from .geometry import (
    E2,
    FloatArray,
    Sector,
    SingularPointError,
    as_points,
    boundary_height,
    in_sector,
    invert,
    reflect_vertical,
)
from .state import VortexState

INV_2PI = 1.0 / (2.0 * np.pi)
_COINCIDE_TOL = 1e-14

OmegaLike = Union[VortexState, Callable[[FloatArray], FloatArray]]


@dataclass(frozen=True)
class BlobKernelConfig:
    """Desingularization of the particle sums.

    With ``epsilon=None`` each particle uses its own core radius (set at
    discretization from the local spacing); a number forces one uniform
    radius. ``cutoff_rule="max"`` replaces 1/|x-y|^2 by 1/max(|x-y|^2, eps^2).
    Image terms use the inverted radius eps/|y - e2|, which keeps the
    regularized field exactly tangent on the boundary.
    """

    epsilon: float | None = None
    cutoff_rule: str = "max"

    def __post_init__(self) -> None:
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("blob radius epsilon must be > 0")
        if self.cutoff_rule != "max":
            raise ValueError(f"unknown cutoff rule {self.cutoff_rule!r}")

    def cores(self, state: VortexState) -> FloatArray:
        if self.epsilon is None:
            return np.asarray(state.core)
        return np.full(state.n, float(self.epsilon))


DEFAULT_BLOB = BlobKernelConfig()


def sources_of(state: VortexState, cfg: BlobKernelConfig | None = None) -> np.ndarray:
    cfg = cfg or DEFAULT_BLOB
    return _kernels.prepare_sources(np.asarray(state.positions), cfg.cores(state), state.strength)


# -- exact kernels -----------------------------------------------------------


def green(x: ArrayLike, y: ArrayLike) -> FloatArray:
    """Dirichlet Green's function of D (non-positive, zero on the boundary)."""
    x = as_points(x)
    y = as_points(y)
    dxy = np.linalg.norm(x - y, axis=-1)
    if np.any(dxy < _COINCIDE_TOL):
        raise SingularPointError("green(x, y) is singular at x = y")
    dyc = np.linalg.norm(y - E2, axis=-1)
    if np.any(dyc < _COINCIDE_TOL):
        raise SingularPointError("green(x, y) needs y != e2; evaluate green(y, x) instead")
    ybar = invert(y)
    return INV_2PI * np.log(dxy / (np.linalg.norm(x - ybar, axis=-1) * dyc))


def _perp_over_sq(d: FloatArray) -> FloatArray:
    r2 = np.sum(d * d, axis=-1)
    return np.stack([-d[..., 1], d[..., 0]], axis=-1) / r2[..., None]


def bs_kernel(x: ArrayLike, y: ArrayLike) -> FloatArray:
    """-[(x-y)^perp/|x-y|^2 - (x-ybar)^perp/|x-ybar|^2]."""
    x = as_points(x)
    y = as_points(y)
    if np.any(np.linalg.norm(x - y, axis=-1) < _COINCIDE_TOL):
        raise SingularPointError("Biot-Savart kernel is singular at x = y")
    return -(_perp_over_sq(x - y) - _perp_over_sq(x - invert(y)))


def bs_kernel_odd(x: ArrayLike, y: ArrayLike) -> FloatArray:
    """Four-term kernel for odd vorticity, integrated over the right half only."""
    y = as_points(y)
    return bs_kernel(x, y) - bs_kernel(x, reflect_vertical(y))


# -- particle sums ------------------------------------------------------------


def velocity(
    x: ArrayLike,
    state: VortexState,
    cfg: BlobKernelConfig | None = None,
    threads: int | None = None,
) -> FloatArray:
    """Regularized velocity (1/2pi) sum_i K_odd^eps(x, y_i) omega_i w_i."""
    x = as_points(x)
    flat = x.reshape(-1, 2)
    if state.n == 0:
        return np.zeros_like(x, dtype=np.float64)
    u = _kernels.velocity_sum(flat, sources_of(state, cfg), threads)
    return u.reshape(x.shape)


def velocity_from_sources(x: ArrayLike, src: np.ndarray, threads: int | None = None) -> FloatArray:
    x = as_points(x)
    return _kernels.velocity_sum(x.reshape(-1, 2), src, threads).reshape(x.shape)


def interaction_energy(state: VortexState, cfg: BlobKernelConfig | None = None) -> float:
    """sum_ij w_i w_j omega_i omega_j G_eps^odd(x_i, x_j), a conserved-quantity proxy."""
    if state.n == 0:
        return 0.0
    src = sources_of(state, cfg)
    return _kernels.energy_sum(np.asarray(state.positions), state.strength, src)


# -- key-lemma decomposition ---------------------------------------------------


def _quadrant_weight(y: FloatArray, side: FloatArray, x: FloatArray) -> FloatArray:
    """Fraction of each particle's cell (a square of the given side) inside Q(x)."""
    f1 = np.clip((y[None, :, 0] - x[:, None, 0]) / side[None, :] + 0.5, 0.0, 1.0)
    f2 = np.clip((y[None, :, 1] - x[:, None, 1]) / side[None, :] + 0.5, 0.0, 1.0)
    return f1 * f2


def sector_integral(x: ArrayLike, omega: OmegaLike, chunk: int = 256) -> FloatArray:
    """(4/pi) * integral over Q(x) of y1 y2 |y|^-4 omega(y) dy.

    For a particle state the particle quadrature is used with a cut-cell
    indicator; for a callable omega a graded tensor Gauss rule is used.
    """
    x = as_points(x)
    flat = x.reshape(-1, 2)
    if isinstance(omega, VortexState):
        out = np.zeros(flat.shape[0])
        if omega.n:
            y = np.asarray(omega.positions)
            r2 = np.sum(y * y, axis=1)
            dens = y[:, 0] * y[:, 1] / (r2 * r2) * omega.strength
            side = np.sqrt(omega.weight)
            for a in range(0, flat.shape[0], chunk):
                wq = _quadrant_weight(y, side, flat[a:a + chunk])
                out[a:a + chunk] = np.sum(wq * dens[None, :], axis=1)
        return (4.0 / np.pi * out).reshape(x.shape[:-1])
    vals = np.array([_sector_integral_fn(p, omega) for p in flat])
    return vals.reshape(x.shape[:-1])


_GL8 = np.polynomial.legendre.leggauss(8)


def _gauss_on(breaks: FloatArray) -> tuple[FloatArray, FloatArray]:
    a = breaks[:-1, None]
    b = breaks[1:, None]
    t, w = _GL8
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * t[None, :]
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _graded_breaks(lo: float, hi: float, scale: float, ratio: float) -> FloatArray:
    """Breakpoints on [lo, hi] refined geometrically toward lo at the given scale."""
    pts = [lo]
    step = scale * (ratio - 1.0)
    p = lo
    while p + step < hi:
        p += step
        pts.append(p)
        step *= ratio
    pts.append(hi)
    return np.asarray(pts)


def _sector_integral_fn(x: FloatArray, omega: Callable[[FloatArray], FloatArray],
                        ratio: float = 1.15) -> float:
    x1, x2 = float(x[0]), float(x[1])
    if x1 >= 1.0:
        return 0.0
    b1 = _graded_breaks(x1, 1.0, max(x1, 1e-300), ratio)
    y1n, y1w = _gauss_on(b1)
    total = 0.0
    for y1, w1 in zip(y1n, y1w):
        lo = max(x2, float(boundary_height(y1)))
        hi = 1.0 + np.sqrt(max(0.0, 1.0 - y1 * y1))
        if hi <= lo:
            continue
        b2 = _graded_breaks(lo, hi, max(y1, lo, 1e-300), 1.5)
        y2n, y2w = _gauss_on(b2)
        pts = np.column_stack([np.full_like(y2n, y1), y2n])
        r2 = y1 * y1 + y2n * y2n
        total += w1 * float(np.sum(y2w * y1 * y2n / (r2 * r2) * omega(pts)))
    return 4.0 / np.pi * total


def polar_graded_quadrature(
    f: Callable[[FloatArray, FloatArray], FloatArray],
    r0: float,
    r1: float,
    phi0: float,
    phi1: float,
    ratio: float = 1.1,
    angular_cells: int = 8,
) -> float:
    """Integral of f(r, phi) dr dphi with log-graded radial cells.

    Radial cells grow geometrically by ``ratio`` from r0, so an integrand
    behaving like 1/r gets the same relative accuracy from every annulus.
    """
    if not (0 < r0 < r1) or not phi0 < phi1:
        raise ValueError("need 0 < r0 < r1 and phi0 < phi1")
    k = max(1, int(np.ceil(np.log(r1 / r0) / np.log(ratio))))
    rb = r0 * (r1 / r0) ** (np.arange(k + 1) / k)
    rn, rw = _gauss_on(rb)
    pn, pw = _gauss_on(np.linspace(phi0, phi1, angular_cells + 1))
    R, P = np.meshgrid(rn, pn, indexing="ij")
    return float(np.einsum("i,j,ij->", rw, pw, f(R, P)))


@dataclass(frozen=True)
class KeyDecomposition:
    """u_j = (-1)^j (sector_integral + residual_j) x_j at one point and time."""

    sector_integral: float
    residual_1: float | None
    residual_2: float | None
    at_point: tuple[float, float]
    at_time: float
    u: tuple[float, float]

    def residual(self, j: int) -> float:
        r = self.residual_1 if j == 1 else self.residual_2
        if r is None:
            raise ValueError(f"point is not in sector D_{j}; residual undefined")
        return r

    def reconstruct(self, j: int) -> float:
        return (-1) ** j * (self.sector_integral + self.residual(j)) * self.at_point[j - 1]


_DEGENERATE = 1e-15


def key_residual(
    x: ArrayLike,
    state: VortexState,
    j: int,
    cfg: BlobKernelConfig | None = None,
    gamma: float = 0.5,
) -> KeyDecomposition:
    p = as_points(x).reshape(2)
    if j not in (1, 2):
        raise ValueError("axis j must be 1 or 2")
    if p[j - 1] < _DEGENERATE:
        raise ValueError(f"x_{j} = {p[j - 1]:.3e} is too small to divide by")
    if not in_sector(p, Sector(gamma, j)):
        raise ValueError(f"point {tuple(p)} is not in D_{j}^{gamma}")
    u = velocity(p, state, cfg)
    integral = float(sector_integral(p, state)) if state.n else 0.0
    res: dict[int, float | None] = {1: None, 2: None}
    for k in (1, 2):
        if k == j or (p[k - 1] >= _DEGENERATE and in_sector(p, Sector(gamma, k))):
            res[k] = float((-1) ** k * u[k - 1] / p[k - 1] - integral)
    return KeyDecomposition(
        sector_integral=integral,
        residual_1=res[1],
        residual_2=res[2],
        at_point=(float(p[0]), float(p[1])),
        at_time=float(state.t),
        u=(float(u[0]), float(u[1])),
    )


@dataclass(frozen=True)
class ResidualSample:
    points: FloatArray  # (M, 2)
    axis: np.ndarray  # (M,) sector index j
    residual: FloatArray  # (M,) B_j


def _sector_sample(gamma: float, j: int, radii: FloatArray, n_angles: int) -> FloatArray:
    lo, hi = Sector(gamma, j).angle_range()
    pts = []
    for r in radii:
        a = max(lo, float(np.arcsin(min(1.0, r / 2.0))))
        phis = a + (hi - a) * np.arange(1, n_angles + 1) / (n_angles + 1)
        pts.append(np.column_stack([r * np.cos(phis), r * np.sin(phis)]))
    return np.concatenate(pts) if pts else np.zeros((0, 2))


def resolved_radius(state: VortexState, factor: float = 16.0) -> float:
    """Smallest radius at which the particle quadrature is trusted."""
    if state.n == 0:
        return 0.0
    return factor * float(np.min(np.linalg.norm(state.positions, axis=1)))


def residual_samples(
    gamma: float,
    state: VortexState,
    k_min: int = 3,
    k_max: int = 20,
    n_angles: int = 16,
    cfg: BlobKernelConfig | None = None,
) -> ResidualSample:
    """B_j on dyadic radii 2^-k with n_angles per sector, both sectors."""
    radii = 2.0 ** -np.arange(k_min, k_max + 1, dtype=float)
    radii = radii[radii >= resolved_radius(state)]
    pts_all, ax_all, res_all = [], [], []
    integral_cache: dict[int, FloatArray] = {}
    for j in (1, 2):
        pts = _sector_sample(gamma, j, radii, n_angles)
        pts = pts[in_sector(pts, Sector(gamma, j))]
        if len(pts) == 0:
            continue
        u = velocity(pts, state, cfg)
        integral = sector_integral(pts, state) if state.n else np.zeros(len(pts))
        integral_cache[j] = integral
        res = (-1) ** j * u[:, j - 1] / pts[:, j - 1] - integral
        pts_all.append(pts)
        ax_all.append(np.full(len(pts), j))
        res_all.append(res)
    if not pts_all:
        return ResidualSample(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros(0))
    return ResidualSample(np.concatenate(pts_all), np.concatenate(ax_all), np.concatenate(res_all))


def estimate_C_gamma(
    gamma: float,
    state: VortexState,
    sample_spec: dict | None = None,
    cfg: BlobKernelConfig | None = None,
) -> float:
    """Empirical sup |B_j| / ||omega||_inf over a log-graded sample of D_j^gamma."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    norm = state.omega_sup()
    if norm == 0.0:
        return 0.0
    spec = {"k_min": 3, "k_max": 20, "n_angles": 16}
    spec.update(sample_spec or {})
    s = residual_samples(gamma, state, cfg=cfg, **spec)
    if s.residual.size == 0:
        return 0.0
    return float(np.max(np.abs(s.residual)) / norm)
