"""Disc geometry: D = B_1(e2), its right half, reflections and sectors.

Points are plain float arrays of shape (2,) or (M, 2); every function here
broadcasts over the leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]

E2 = np.array([0.0, 1.0])
BOUNDARY_TOL = 1e-12
_CENTER_TOL = 1e-14


class SingularPointError(ValueError):
    """Raised when an operation is evaluated at one of its singular points."""


def as_points(p: ArrayLike) -> FloatArray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape[-1] != 2:
        raise ValueError(f"points must have trailing dimension 2, got shape {arr.shape}")
    return arr


def reflect_vertical(p: ArrayLike) -> FloatArray:
    """Mirror across the vertical axis: (x1, x2) -> (-x1, x2)."""
    q = as_points(p).copy()
    q[..., 0] = -q[..., 0]
    return q


def invert(p: ArrayLike) -> FloatArray:
    """Inversion in the unit circle around e2: e2 + (p - e2)/|p - e2|^2."""
    p = as_points(p)
    d = p - E2
    r2 = np.sum(d * d, axis=-1)
    if np.any(r2 < _CENTER_TOL**2):
        raise SingularPointError("inversion is singular at the disc center e2")
    return E2 + d / r2[..., None]


def dist_to_center(p: ArrayLike) -> FloatArray:
    d = as_points(p) - E2
    return np.sqrt(np.sum(d * d, axis=-1))


def in_disc(p: ArrayLike, closed: bool = False) -> NDArray[np.bool_]:
    r = dist_to_center(p)
    if closed:
        return r <= 1.0 + BOUNDARY_TOL
    return r < 1.0 - BOUNDARY_TOL


def on_boundary(p: ArrayLike, tol: float = BOUNDARY_TOL) -> NDArray[np.bool_]:
    return np.abs(dist_to_center(p) - 1.0) <= tol


def in_right_half(p: ArrayLike) -> NDArray[np.bool_]:
    """Membership in the open right half-disc D+."""
    p = as_points(p)
    return in_disc(p) & (p[..., 0] > 0.0)


def boundary_height(x1: ArrayLike) -> FloatArray:
    """Lower boundary of D above abscissa x1, i.e. 1 - sqrt(1 - x1^2).

    Written as x1^2 / (1 + sqrt(1 - x1^2)) to stay accurate for tiny x1.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    return x1 * x1 / (1.0 + np.sqrt(np.clip(1.0 - x1 * x1, 0.0, None)))


def project_to_disc(p: ArrayLike, tol: float) -> tuple[FloatArray, int]:
    """Pull points lying outside the closed half-disc back onto it.

    Points outside the circle by at most ``tol`` are moved radially onto
    the circle; points with -tol <= x1 < 0 are put on the axis. Returns the
    corrected points and the number of corrections. Anything further out
    raises ``ValueError``.
    """
    q = as_points(p).copy()
    d = q - E2
    r = np.sqrt(np.sum(d * d, axis=-1))
    over = r > 1.0
    if np.any(r - 1.0 > tol):
        worst = float(np.max(r - 1.0))
        raise ValueError(f"point left the disc by {worst:.3e} (tolerance {tol:.1e})")
    q[over] = E2 + d[over] / r[over, None]
    left = q[..., 0] < 0.0
    if np.any(q[..., 0] < -tol):
        worst = float(-np.min(q[..., 0]))
        raise ValueError(f"point crossed the symmetry axis by {worst:.3e}")
    q[left, 0] = 0.0
    return q, int(np.count_nonzero(over) + np.count_nonzero(left))


@dataclass(frozen=True)
class Sector:
    """D_j^gamma = {x in D+ : x_j > gamma * x_(3-j)}."""

    gamma: float
    axis: int

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError("sector aperture gamma must be positive")
        if self.axis not in (1, 2):
            raise ValueError("sector axis must be 1 or 2")

    def angle_range(self) -> tuple[float, float]:
        """Polar angle interval (around the origin) covered by the sector."""
        if self.axis == 1:
            return 0.0, float(np.arctan2(1.0, self.gamma))
        return float(np.arctan2(self.gamma, 1.0)), 0.5 * np.pi


def in_sector(p: ArrayLike, s: Sector) -> NDArray[np.bool_]:
    p = as_points(p)
    xj = p[..., s.axis - 1]
    xo = p[..., 2 - s.axis]
    return in_right_half(p) & (xj > s.gamma * xo)


def in_quadrant(y: ArrayLike, x: ArrayLike) -> NDArray[np.bool_]:
    """y in Q(x) = D+ cap [x1, inf) x [x2, inf); the corner is included."""
    y = as_points(y)
    x = as_points(x)
    return in_right_half(y) & (y[..., 0] >= x[..., 0]) & (y[..., 1] >= x[..., 1])
