"""Corridor ODEs, Gronwall margins, merging profiles, area checks and rate fits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from shapely.geometry import LinearRing

from .geometry import FloatArray, Sector, boundary_height, in_sector
from .kernel import BlobKernelConfig, interaction_energy, velocity
from .solver import ContourCurve, Timeline, advect, omega_at, track_contour
from .state import VortexState


class FitError(ValueError):
    """Series unsuitable for the requested growth model."""


class HypothesisError(ValueError):
    """Fitted constants violate a hypothesis needed by the rate statement."""


def _velocity_fn(fld, t: float | None, cfg: BlobKernelConfig | None = None
                 ) -> Callable[[FloatArray], FloatArray]:
    if isinstance(fld, Timeline):
        tt = fld.t_start if t is None else t
        return lambda x: fld.velocity(x, tt)
    if isinstance(fld, VortexState):
        return lambda x: velocity(x, fld, cfg)
    if callable(fld):
        return fld
    raise TypeError("expected a VortexState, a Timeline or a velocity callable")


# -- corridor a(t), b(t) ---------------------------------------------------------


def column_points(x1: float, M: int = 64) -> FloatArray:
    """M points on {x1} x [boundary height, x1], geometrically crowded toward the bottom."""
    lo = float(boundary_height(x1))
    if lo <= 0 or lo >= x1:
        lo = x1 * 1e-12
    x2 = np.geomspace(lo, x1, M)
    return np.column_stack([np.full(M, x1), x2])


def u1_extremes(x1: float, fld, M: int = 64, t: float | None = None,
                cfg: BlobKernelConfig | None = None) -> tuple[float, float]:
    """(min, max) of u1 over the column {(x1, x2) in D+ : x2 <= x1}."""
    if not 0 < x1 < 1:
        raise ValueError("x1 must lie in (0, 1)")
    u = _velocity_fn(fld, t, cfg)(column_points(x1, M))[:, 0]
    return float(np.min(u)), float(np.max(u))


@dataclass
class ABSeries:
    """a(t) (slowest inflow, from delta^2) and b(t) (fastest, from delta) in logs."""

    times: list[float] = field(default_factory=list)
    log_a: list[float] = field(default_factory=list)
    log_b: list[float] = field(default_factory=list)
    collapsed_at: float | None = None
    M: int = 64

    @classmethod
    def start(cls, delta: float, t0: float = 0.0, M: int = 64) -> "ABSeries":
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        return cls(times=[t0], log_a=[2.0 * math.log(delta)], log_b=[math.log(delta)], M=M)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def a(self) -> FloatArray:
        return np.exp(self.log_a)

    @property
    def b(self) -> FloatArray:
        return np.exp(self.log_b)

    def log_ratio(self) -> FloatArray:
        return np.asarray(self.log_a) - np.asarray(self.log_b)


def _ab_rhs(fld, t: float, la: float, lb: float, M: int, cfg) -> tuple[float, float]:
    a, b = math.exp(la), math.exp(lb)
    pts = np.vstack([column_points(a, M), column_points(b, M)])
    u = _velocity_fn(fld, t, cfg)(pts)[:, 0]
    return float(np.max(u[:M])) / a, float(np.min(u[M:])) / b


def advance_ab(series: ABSeries, fld, dt: float, cfg: BlobKernelConfig | None = None) -> ABSeries:
    """One RK4 step of d(ln a)/dt = max u1(a, .)/a and d(ln b)/dt = min u1(b, .)/b.

    ``fld`` is a Timeline (time-dependent field) or a frozen VortexState.
    A crossing a >= b is recorded in ``collapsed_at``; the series continues.
    """
    t, la, lb = series.times[-1], series.log_a[-1], series.log_b[-1]
    M = series.M
    k1 = _ab_rhs(fld, t, la, lb, M, cfg)
    k2 = _ab_rhs(fld, t + dt / 2, la + dt / 2 * k1[0], lb + dt / 2 * k1[1], M, cfg)
    k3 = _ab_rhs(fld, t + dt / 2, la + dt / 2 * k2[0], lb + dt / 2 * k2[1], M, cfg)
    k4 = _ab_rhs(fld, t + dt, la + dt * k3[0], lb + dt * k3[1], M, cfg)
    la += dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    lb += dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    series.times.append(t + dt)
    series.log_a.append(la)
    series.log_b.append(lb)
    if la >= lb and series.collapsed_at is None:
        series.collapsed_at = t + dt
    return series


def integrate_ab(timeline: Timeline, delta: float, M: int = 64,
                 until: float | None = None, cfg: BlobKernelConfig | None = None) -> ABSeries:
    """ABSeries on the timeline's own snapshot times."""
    s = ABSeries.start(delta, timeline.t_start, M)
    end = timeline.t_end if until is None else until
    for t0, t1 in zip(timeline.times[:-1], timeline.times[1:]):
        if t0 >= end - 1e-15:
            break
        advance_ab(s, timeline, min(t1, end) - t0, cfg)
    return s


# -- Gronwall ----------------------------------------------------------------------


def gronwall_C(C_half: float) -> float:
    """C = ln 2 / 8 + 4/pi + 2 C_half."""
    return math.log(2.0) / 8.0 + 4.0 / math.pi + 2.0 * C_half


def gronwall_bound(t: FloatArray, y0: float, C: float, form: str = "integrated") -> FloatArray:
    """Upper bound for ln(a/b) from y' <= y/8 + C, y(0) = y0.

    ``integrated`` is the exact comparison solution (y0 + 8C) e^{t/8} - 8C;
    ``literal`` is (y0 + C) e^{t/8}, which is not implied by the differential
    inequality once t > 8 ln(8/7).
    """
    t = np.asarray(t, dtype=np.float64)
    g = np.exp(t / 8.0)
    if form == "integrated":
        return y0 * g + 8.0 * C * np.expm1(t / 8.0)
    if form == "literal":
        return (y0 + C) * g
    raise ValueError(f"unknown Gronwall form {form!r}")


@dataclass(frozen=True)
class GronwallReport:
    margins: FloatArray
    C: float
    first_violation: float | None

    def __len__(self) -> int:
        return len(self.margins)

    def __getitem__(self, k):
        return self.margins[k]


def gronwall_margin(series: ABSeries, C_half: float, form: str = "integrated",
                    tol: float = 0.0) -> GronwallReport:
    """bound - ln(a/b) at every time; the first time it drops below -tol is reported."""
    C = gronwall_C(C_half)
    t = np.asarray(series.times) - series.times[0]
    y = series.log_ratio()
    margins = gronwall_bound(t, float(y[0]), C, form) - y
    bad = np.nonzero(margins < -tol)[0]
    first = float(series.times[bad[0]]) if len(bad) else None
    return GronwallReport(margins=margins, C=C, first_violation=first)


def synthetic_bounding_series(delta: float, C_half: float, t_end: float, n: int,
                              log_b: Callable[[float], float] | None = None) -> ABSeries:
    """Series whose ln(a/b) solves y' = y/8 + C exactly (RK4, fine steps).

    ``log_b`` defaults to the constant ln(delta); log_a = log_b + y.
    """
    C = gronwall_C(C_half)
    log_b = log_b or (lambda t: math.log(delta))
    times = np.linspace(0.0, t_end, n)
    y = math.log(delta)  # ln(delta^2 / delta)
    ys = [y]
    sub = 64
    for t0, t1 in zip(times[:-1], times[1:]):
        h = (t1 - t0) / sub
        for _ in range(sub):
            f = lambda v: v / 8.0 + C  # noqa: E731
            k1 = f(y)
            k2 = f(y + h / 2 * k1)
            k3 = f(y + h / 2 * k2)
            k4 = f(y + h * k3)
            y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(y)
    lb = [log_b(float(t)) for t in times]
    return ABSeries(times=list(map(float, times)), log_a=[b + v for b, v in zip(lb, ys)], log_b=lb)


# -- hyperbolic lower bound --------------------------------------------------------


@dataclass(frozen=True)
class HyperbolicReport:
    fraction: float  # share of samples with (-1)^j u_j >= A x_j
    A_eff: float  # largest A for which every sample passes (>= 0)
    n_samples: int
    min_ratio: float


def hyperbolic_samples(delta: float, n_radii: int = 24, n_angles: int = 12,
                       r_min: float | None = None, gamma: float = 0.5) -> tuple[FloatArray, FloatArray]:
    """Points of D+ cap B_{2 delta}(0) cap D_j^gamma for j = 1, 2 and their j."""
    r_min = r_min or 2.0 * delta * 1e-3
    radii = np.geomspace(r_min, 2.0 * delta, n_radii)
    pts, axes = [], []
    for j in (1, 2):
        lo, hi = Sector(gamma, j).angle_range()
        for r in radii:
            a = max(lo, math.asin(min(1.0, r / 2.0)))
            phis = a + (hi - a) * np.arange(1, n_angles + 1) / (n_angles + 1)
            p = np.column_stack([r * np.cos(phis), r * np.sin(phis)])
            p = p[in_sector(p, Sector(gamma, j))]
            pts.append(p)
            axes.append(np.full(len(p), j))
    return np.concatenate(pts), np.concatenate(axes)


def check_2_6(state, A: float, delta: float, sample_spec: dict | None = None,
              t: float | None = None, cfg: BlobKernelConfig | None = None) -> HyperbolicReport:
    """Test (-1)^j u_j(x) >= A x_j on sampled points near the origin."""
    pts, axes = hyperbolic_samples(delta, **(sample_spec or {}))
    u = _velocity_fn(state, t, cfg)(pts)
    idx = axes - 1
    rows = np.arange(len(pts))
    ratio = np.where(axes == 1, -1.0, 1.0) * u[rows, idx] / pts[rows, idx]
    frac = float(np.mean(ratio >= A)) if len(ratio) else 0.0
    mn = float(np.min(ratio)) if len(ratio) else 0.0
    return HyperbolicReport(fraction=frac, A_eff=max(0.0, mn), n_samples=len(pts), min_ratio=mn)


# -- merging profile -------------------------------------------------------------------


@dataclass(frozen=True)
class MergingProfile:
    t: float
    betas: FloatArray
    alphas: FloatArray  # NaN where not found
    found: np.ndarray
    delta: float
    truncated: bool = False
    agreement: float | None = None  # share of found alphas confirmed by backward transport

    @property
    def spacing(self) -> float:
        if len(self.betas) < 2:
            return self.delta
        return float(self.betas[1] - self.betas[0])


def uniform_betas(delta: float, n: int) -> FloatArray:
    """Cell midpoints of a uniform partition of (0, delta)."""
    return (np.arange(n) + 0.5) * delta / n


def _segment_hits(markers: FloatArray, beta: float, closed: bool) -> tuple[np.ndarray, FloatArray]:
    """Indices k of segments (k, k+1) meeting x2 = beta and the crossing x1."""
    m = np.vstack([markers, markers[:1]]) if closed else markers
    y0, y1 = m[:-1, 1] - beta, m[1:, 1] - beta
    hit = np.nonzero((y0 * y1 <= 0) & (y0 != y1))[0]
    s = y0[hit] / (y0[hit] - y1[hit])
    x = m[hit, 0] + s * (m[hit + 1, 0] - m[hit, 0])
    return hit, x


def crossings(markers: FloatArray, beta: float, closed: bool = False) -> FloatArray:
    """x1 values where the polyline meets the horizontal line x2 = beta."""
    return np.sort(_segment_hits(markers, beta, closed)[1])


def _polish(contour: ContourCurve, timeline: Timeline, betas: FloatArray, seg: np.ndarray,
            iters: int) -> FloatArray:
    """Bisect each bracketing segment in seed parameter, re-advecting midpoints."""
    c = contour
    k1 = (seg + 1) % c.n
    p_lo = c.params[seg].copy()
    p_hi = c.params[k1].copy()
    if c.closed:
        p_hi = np.where(k1 == 0, p_hi + 1.0, p_hi)
    x_lo = c.markers[seg].copy()
    x_hi = c.markers[k1].copy()
    for _ in range(iters):
        mid = 0.5 * (p_lo + p_hi)
        seeds = c.seed_fn(np.mod(mid, 1.0) if c.closed else mid)
        x_mid = advect(seeds, c.seeded_at, c.time, timeline) if c.time != c.seeded_at else seeds
        lower = (x_lo[:, 1] - betas) * (x_mid[:, 1] - betas) <= 0
        p_hi = np.where(lower, mid, p_hi)
        x_hi = np.where(lower[:, None], x_mid, x_hi)
        p_lo = np.where(lower, p_lo, mid)
        x_lo = np.where(lower[:, None], x_lo, x_mid)
    y0, y1 = x_lo[:, 1] - betas, x_hi[:, 1] - betas
    den = np.where(y0 == y1, 1.0, y0 - y1)
    s = np.where(y0 == y1, 0.5, y0 / den)
    return x_lo[:, 0] + s * (x_hi[:, 0] - x_lo[:, 0])


def alpha_profile(
    t: float,
    betas: Sequence[float],
    contour: ContourCurve,
    delta: float,
    timeline: Timeline | None = None,
    omega0: Callable[[FloatArray], FloatArray] | None = None,
    level: float = 0.99,
    polish: int = 0,
) -> MergingProfile:
    """Smallest crossing alpha in (0, delta) of each line x2 = beta with the contour.

    With ``polish`` > 0 (and a timeline) each bracketing marker pair is
    bisected that many times in seed parameter before the final linear
    interpolation. With a timeline and omega0 the result is cross-checked by
    backward transport: omega >= level just right of alpha and < level just left.
    """
    if abs(contour.time - t) > 1e-12:
        raise ValueError(f"contour is at t={contour.time}, profile requested at t={t}")
    betas = np.asarray(betas, dtype=np.float64)
    alphas = np.full(len(betas), np.nan)
    seg = np.full(len(betas), -1)
    for k, beta in enumerate(betas):
        hit, xs = _segment_hits(contour.markers, float(beta), contour.closed)
        ok = (xs > 0) & (xs < delta)
        if np.any(ok):
            j = int(np.argmin(np.where(ok, xs, np.inf)))
            alphas[k] = xs[j]
            seg[k] = hit[j]
    found = ~np.isnan(alphas)
    if polish and timeline is not None and np.any(found):
        refined = _polish(contour, timeline, betas[found], seg[found], polish)
        alphas[found] = np.where((refined > 0) & (refined < delta), refined, alphas[found])
    agreement = None
    if timeline is not None and omega0 is not None and np.any(found):
        a, b = alphas[found], betas[found]
        right = np.column_stack([a * (1 + 1e-3) + 1e-9, b])
        left = np.column_stack([a * (1 - 1e-3), b])
        wr = omega_at(right, t, timeline, omega0)
        wl = omega_at(left, t, timeline, omega0)
        agreement = float(np.mean((wr >= level) & (wl < level)))
    return MergingProfile(t=t, betas=betas, alphas=alphas, found=found, delta=delta,
                          truncated=contour.truncated, agreement=agreement)


def merging_measure(p: MergingProfile, threshold: float) -> float:
    """spacing * #{beta : alpha(beta) < threshold}; betas must be uniform."""
    if len(p.betas) > 2 and not np.allclose(np.diff(p.betas), p.spacing, rtol=1e-9, atol=0):
        raise ValueError("merging_measure needs uniformly spaced betas")
    hit = p.found & (np.nan_to_num(p.alphas, nan=np.inf) < threshold)
    return p.spacing * int(np.count_nonzero(hit))


def s_T_of(a_T: float, A: float) -> float:
    """s_T = |ln a(T)| / A."""
    if not 0 < a_T < 1:
        raise ValueError("a(T) must lie in (0, 1)")
    if not A > 0:
        raise ValueError("A must be positive")
    return abs(math.log(a_T)) / A


# -- area --------------------------------------------------------------------------------


def shoelace(points: FloatArray) -> float:
    """Signed polygon area (counter-clockwise positive)."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class AreaReport:
    times: list[float]
    areas: list[float]
    rel_dev: list[float]
    self_intersecting: list[bool]
    truncated: bool


def area_check(c: ContourCurve, timeline: Timeline, times: Sequence[float],
               substeps: int = 1) -> AreaReport:
    """Signed shoelace area of the transported closed contour at each time."""
    if not c.closed:
        raise ValueError("area_check needs a closed contour")
    a0 = shoelace(c.markers)
    if a0 == 0:
        raise ValueError("contour encloses no area")
    times = sorted(times)
    shots = []
    cur = c
    for t in times:
        if t == cur.time:
            shots.append(cur)
            continue
        cur = track_contour(cur, timeline, t, substeps=substeps)
        shots.append(cur)
    areas = [shoelace(s.markers) for s in shots]
    simple = [not LinearRing(s.markers).is_simple for s in shots]
    return AreaReport(times=list(times), areas=areas, rel_dev=[(a - a0) / a0 for a in areas],
                      self_intersecting=simple, truncated=any(s.truncated for s in shots))


def energy_drift(timeline: Timeline, every: int = 1, cfg: BlobKernelConfig | None = None) -> FloatArray:
    """Relative change of the discrete interaction energy along the timeline."""
    idx = list(range(0, len(timeline), every))
    if idx[-1] != len(timeline) - 1:
        idx.append(len(timeline) - 1)
    e = np.array([interaction_energy(timeline.state(n), cfg) for n in idx])
    if e[0] == 0:
        return np.zeros(len(e))
    return (e - e[0]) / abs(e[0])


# -- growth fits and rate calculators -----------------------------------------------------

MODELS = ("double_exp", "mixed", "exp")


@dataclass(frozen=True)
class RateFit:
    """Fitted constants.

    double_exp: a = exp(-c e^{t/C}), b = exp(-c_b e^{t/C}) (shared C).
    mixed:      a = exp(-c e^{t/C}), b = exp(-c_b e^{t/C_b}).
    exp:        a = c e^{-t/C},      b = c_b e^{-C_b t}.
    ``residual`` is the RMS misfit of ln a, ``residual_b`` that of ln b.
    """

    model: str
    c: float
    C: float
    c_b: float | None
    C_b: float | None
    window: tuple[float, float]
    residual: float
    residual_b: float | None = None

    def log_a(self, t: FloatArray) -> FloatArray:
        t = np.asarray(t, dtype=np.float64)
        if self.model == "exp":
            return math.log(self.c) - t / self.C
        return -self.c * np.exp(t / self.C)

    def log_b(self, t: FloatArray) -> FloatArray:
        t = np.asarray(t, dtype=np.float64)
        if self.c_b is None:
            raise FitError("fit carries no b constants")
        if self.model == "exp":
            return math.log(self.c_b) - self.C_b * t
        Cb = self.C if self.model == "double_exp" else self.C_b
        return -self.c_b * np.exp(t / Cb)


def _line(t: FloatArray, y: FloatArray) -> tuple[float, float]:
    """Least-squares slope and intercept."""
    tm, ym = t.mean(), y.mean()
    dt = t - tm
    den = float(np.sum(dt * dt))
    if den == 0:
        raise FitError("degenerate time window")
    slope = float(np.sum(dt * (y - ym))) / den
    return slope, float(ym - slope * tm)


def _check_series(t: FloatArray, y: FloatArray, name: str) -> None:
    if len(t) < 10:
        raise FitError(f"need at least 10 samples in the window, got {len(t)}")
    d = np.diff(y)
    if np.all(d == 0):
        raise FitError(f"{name} is constant in the window")
    if np.any(d > 0):
        raise FitError(f"{name} is not monotone non-increasing in the window")


def _rms(r: FloatArray) -> float:
    return float(np.sqrt(np.mean(r * r)))


def fit_growth(series: ABSeries, model: str = "double_exp",
               window: tuple[float, float] | None = None, fit_b: bool = True) -> RateFit:
    """Least-squares fit of the growth model on the samples inside ``window``."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    t = np.asarray(series.times, dtype=np.float64)
    la = np.asarray(series.log_a, dtype=np.float64)
    lb = np.asarray(series.log_b, dtype=np.float64)
    lo, hi = window if window is not None else (t[0], t[-1])
    sel = (t >= lo) & (t <= hi)
    t, la, lb = t[sel], la[sel], lb[sel]
    _check_series(t, la, "log_a")
    if model == "exp":
        slope, icpt = _line(t, la)
        if slope >= 0:
            raise FitError("log_a does not decay")
        c, C = math.exp(icpt), -1.0 / slope
    else:
        if np.any(la >= 0):
            raise FitError("double-exponential model needs a < 1")
        slope, icpt = _line(t, np.log(-la))
        if slope <= 0:
            raise FitError("ln(-ln a) does not grow")
        c, C = math.exp(icpt), 1.0 / slope
    fit = RateFit(model, c, C, None, None, (float(lo), float(hi)), 0.0)
    res_a = _rms(fit.log_a(t) - la)
    c_b = C_b = res_b = None
    if fit_b:
        _check_series(t, lb, "log_b")
        if model == "exp":
            s, i = _line(t, lb)
            c_b, C_b = math.exp(i), -s
        else:
            if np.any(lb >= 0):
                raise FitError("double-exponential model needs b < 1")
            if model == "double_exp":
                c_b = math.exp(float(np.mean(np.log(-lb) - t / C)))
            else:
                s, i = _line(t, np.log(-lb))
                if s <= 0:
                    raise FitError("ln(-ln b) does not grow")
                c_b, C_b = math.exp(i), 1.0 / s
    fit = RateFit(model, c, C, c_b, C_b, (float(lo), float(hi)), res_a)
    if fit_b:
        res_b = _rms(fit.log_b(t) - lb)
    return RateFit(model, c, C, c_b, C_b, (float(lo), float(hi)), res_a, res_b)


def merging_exponent(C: float, C_prime: float) -> float:
    """(16 + C') / (16 + C)."""
    return (16.0 + C_prime) / (16.0 + C)


def solve_T_t(t: float, log_b: Callable[[float], float], C: float, A: float, C_half: float,
              bracket: tuple[float, float] = (0.0, 1e3), rtol: float = 1e-12) -> tuple[float, float]:
    """Root T of ln b((16+C)/C T) = ln 2 + 8 C_half - A t / 3 by bisection.

    Returns (T, residual in log form); NaN when the bracket holds no root.
    """
    target = math.log(2.0) + 8.0 * C_half - A * t / 3.0
    k = (16.0 + C) / C

    def g(T: float) -> float:
        return float(log_b(k * T)) - target

    lo, hi = bracket
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo, 0.0
    if not (glo > 0 > ghi):
        return math.nan, math.nan
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= rtol * abs(mid) * 1e-4:
            break
        gm = g(mid)
        if gm == 0:
            lo = hi = mid
            break
        if gm > 0:
            lo = mid
        else:
            hi = mid
    T = 0.5 * (lo + hi)
    return T, abs(g(T))


@dataclass
class RatePrediction:
    model: str
    mode: str
    c: float
    C: float
    c_b: float | None
    C_b: float | None
    exponent: float | None
    bound_form: str
    table: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"model": self.model, "mode": self.mode, "c": self.c, "C": self.C}
        if self.model == "double_exp":
            out["c_tilde"] = self.c_b
        else:
            out["c_prime"] = self.c_b
        out["C_prime"] = self.C_b
        out["exponent"] = self.exponent
        out["bound_form"] = self.bound_form
        out["T_t_table"] = self.table
        return out


def rate_predict(fit_a: RateFit, fit_b: RateFit | None, A: float, C_half: float,
                 mode: str | None = None, times: Sequence[float] = (),
                 bracket: tuple[float, float] = (0.0, 1e3), rtol: float = 1e-12) -> RatePrediction:
    """Conditional merging-rate statements from fitted a, b constants.

    mode ``mixed``: exponent (16+C')/(16+C) with bound exp(-c (A t / 4C')^{C'/(16+C)}).
    mode ``theorem``: needs the shared-C double-exponential fit and c > 2 c_b;
    solves for T_t at each requested t and returns exp(-c e^{T_t/C}).
    mode ``best``: b >= c' e^{-C' t}; exponent A t / ((50 + 3C) C').
    """
    fit_b = fit_b or fit_a
    if mode is None:
        mode = {"double_exp": "theorem", "mixed": "mixed", "exp": "best"}[fit_b.model]
    c, C = fit_a.c, fit_a.C
    c_b = fit_b.c_b
    if mode == "mixed":
        Cp = fit_b.C_b
        if Cp is None:
            raise FitError("mixed mode needs a fitted C' for b")
        expo = merging_exponent(C, Cp)
        table = [{"t": float(t), "T_t": None,
                  "bound": math.exp(-c * (A * t / (4 * Cp)) ** (Cp / (16 + C)))} for t in times]
        return RatePrediction("mixed", mode, c, C, c_b, Cp, expo,
                              "exp(-c (A t / (4 C'))^(C'/(16+C)))", table)
    if mode == "theorem":
        if fit_b.model != "double_exp":
            raise HypothesisError("T_t equation needs a and b fitted with a shared C")
        if not c > 2.0 * c_b:
            raise HypothesisError(
                f"hypothesis c > 2 c_tilde fails (c={c:.6g}, c_tilde={c_b:.6g}); "
                "the T_t construction needs the a-decay to dominate the b-decay")
        table = []
        for t in times:
            T, _ = solve_T_t(float(t), lambda s: fit_b.log_b(s), C, A, C_half, bracket, rtol)
            log_bound = -c * math.exp(T / C) if not math.isnan(T) else math.nan
            table.append({"t": float(t), "T_t": T, "bound": math.exp(log_bound),
                          "log_bound": log_bound})
        return RatePrediction("double_exp", mode, c, C, c_b, C, None,
                              "exp(-c e^(T_t / C))", table)
    if mode == "best":
        Cp = fit_b.C_b
        if Cp is None:
            raise FitError("best-case mode needs a fitted exponential rate C' for b")
        table = []
        for t in times:
            e = A * t / ((50.0 + 3.0 * C) * Cp)
            table.append({"t": float(t), "T_t": C * e, "bound": math.exp(-c * math.exp(e))})
        return RatePrediction(fit_b.model, mode, c, C, c_b, Cp, None,
                              "exp(-c e^(A t / ((50 + 3C) C')))", table)
    raise ValueError(f"unknown mode {mode!r}")


# -- CSV output ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if x is None:
        return ""
    return repr(float(x))


def write_csv(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_ab_csv(path, series: ABSeries, margins: GronwallReport) -> None:
    write_csv(path, ["t", "log_a", "log_b", "gronwall_margin"],
              zip(series.times, series.log_a, series.log_b, margins.margins))


def write_alpha_csv(path, p: MergingProfile) -> None:
    write_csv(path, ["beta", "alpha", "found"], zip(p.betas, p.alphas, p.found))


def write_area_csv(path, rep: AreaReport) -> None:
    write_csv(path, ["t", "rel_dev"], zip(rep.times, rep.rel_dev))
