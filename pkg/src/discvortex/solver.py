"""Time stepping, snapshot timeline, tracers and material contours."""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import E2, FloatArray, as_points, project_to_disc
from .kernel import BlobKernelConfig, sources_of, velocity, velocity_from_sources
from .state import VortexState

__all__ = [
    "VortexState",
    "StabilityError",
    "NumericalError",
    "stable_dt",
    "spacing",
    "step",
    "simulate",
    "Timeline",
    "advect",
    "FlowMapQuery",
    "flow_map",
    "ContourCurve",
    "ContourTracker",
    "track_contour",
    "omega_at",
    "write_checkpoint",
    "read_checkpoint",
]

BOUNDARY_TOL = 1e-8


class StabilityError(ValueError):
    """Time step larger than the particle CFL limit."""


class NumericalError(RuntimeError):
    """A trajectory left the closed half-disc beyond the projection tolerance."""


# -- particle stepping ---------------------------------------------------------


def spacing(state: VortexState) -> FloatArray:
    """Current particle spacing.

    On a log-polar graded grid (``ratio`` in meta) the spacing is
    ln(ratio) * |x|, i.e. a fixed step in (ln rho, phi); otherwise sqrt(w).
    """
    ratio = state.meta.get("ratio")
    if ratio:
        return math.log(ratio) * np.linalg.norm(state.positions, axis=1)
    return np.sqrt(state.weight)


def stable_dt(state: VortexState, u: FloatArray | None = None, cfl: float = 0.5,
              cfg: BlobKernelConfig | None = None) -> float:
    """cfl * min_i h_i / |u_i| with h_i the current particle spacing."""
    if state.n == 0:
        return math.inf
    if u is None:
        u = velocity(state.positions, state, cfg)
    speed = np.linalg.norm(u, axis=1)
    h = spacing(state)
    moving = speed > 0
    if not np.any(moving):
        return math.inf
    return float(cfl * np.min(h[moving] / speed[moving]))


def _project(points: FloatArray, tol: float) -> tuple[FloatArray, int]:
    try:
        return project_to_disc(points, tol)
    except ValueError as exc:
        raise NumericalError(str(exc)) from exc


def step(
    state: VortexState,
    dt: float,
    cfg: BlobKernelConfig | None = None,
    cfl: float = 0.5,
    boundary_tol: float = BOUNDARY_TOL,
    check_stability: bool = True,
    u0: FloatArray | None = None,
) -> VortexState:
    """One classical RK4 step of every particle; omega and weights are untouched.

    ``u0`` may carry the already evaluated particle velocities at ``state``.
    """
    if state.n == 0 or dt == 0:
        return state.with_positions(state.positions, state.t + dt)
    x0 = np.asarray(state.positions)
    k1 = velocity(x0, state, cfg) if u0 is None else u0
    if check_stability:
        limit = stable_dt(state, k1, cfl)
        if abs(dt) > limit * (1 + 1e-12):
            raise StabilityError(f"dt={abs(dt):.4g} exceeds the stability limit {limit:.4g}")

    def vel(x: FloatArray) -> FloatArray:
        return velocity(x, state.with_positions(x, state.t), cfg)

    k2 = vel(x0 + 0.5 * dt * k1)
    k3 = vel(x0 + 0.5 * dt * k2)
    k4 = vel(x0 + dt * k3)
    x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    x1, fixed = _project(x1, boundary_tol)
    new = state.with_positions(x1, state.t + dt)
    new.meta["projections"] = state.meta.get("projections", 0) + fixed
    return new


class Timeline:
    """Particle snapshots at every step; the velocity between two snapshots
    is the linear interpolation of their fields."""

    def __init__(self, state0: VortexState, cfg: BlobKernelConfig | None = None,
                 cache_size: int = 4, near_origin: float = 4.0,
                 boundary_tol: float = BOUNDARY_TOL):
        self.base = state0
        self.cfg = cfg
        self.times: list[float] = [float(state0.t)]
        self.positions: list[FloatArray] = [np.asarray(state0.positions)]
        self._cache: dict[int, np.ndarray] = {}
        self._cache_order: list[int] = []
        self._cache_size = cache_size
        self.projections = 0
        self.near_origin = near_origin
        self.boundary_tol = boundary_tol

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_start(self) -> float:
        return self.times[0]

    @property
    def t_end(self) -> float:
        return self.times[-1]

    def append(self, state: VortexState) -> None:
        if state.t <= self.times[-1]:
            raise ValueError("snapshots must be appended in increasing time")
        self.times.append(float(state.t))
        self.positions.append(np.asarray(state.positions))

    def state(self, n: int) -> VortexState:
        return self.base.with_positions(self.positions[n], self.times[n])

    @property
    def last(self) -> VortexState:
        return self.state(len(self) - 1)

    def sources(self, n: int) -> np.ndarray:
        if n in self._cache:
            return self._cache[n]
        src = sources_of(self.state(n), self.cfg)
        self._cache[n] = src
        self._cache_order.append(n)
        while len(self._cache_order) > self._cache_size:
            self._cache.pop(self._cache_order.pop(0), None)
        return src

    def inner_core(self, n: int) -> float:
        pos = self.positions[n]
        if len(pos) == 0:
            return 0.0
        i = int(np.argmin(np.sum(pos * pos, axis=1)))
        core = self.cfg.epsilon if (self.cfg and self.cfg.epsilon) else self.base.core[i]
        return float(core)

    def index(self, t: float) -> int:
        """Interval index n with times[n] <= t <= times[n+1]."""
        if not (self.t_start - 1e-12 <= t <= self.t_end + 1e-12):
            raise ValueError(
                f"time {t:.6g} outside simulated range [{self.t_start:.6g}, {self.t_end:.6g}]")
        if len(self.times) == 1:
            return 0
        n = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(n, 0), len(self.times) - 2)

    def field(self, x: FloatArray, n: int, theta: float) -> FloatArray:
        """Velocity at x for time times[n] + theta (times[n+1] - times[n])."""
        if self.base.n == 0:
            return np.zeros_like(x)
        if theta <= 0.0 or len(self.times) == 1:
            return velocity_from_sources(x, self.sources(n))
        if theta >= 1.0:
            return velocity_from_sources(x, self.sources(n + 1))
        return ((1.0 - theta) * velocity_from_sources(x, self.sources(n))
                + theta * velocity_from_sources(x, self.sources(n + 1)))

    def velocity(self, x: FloatArray, t: float) -> FloatArray:
        x = as_points(x)
        n = self.index(t)
        if len(self.times) == 1:
            return self.field(x.reshape(-1, 2), 0, 0.0).reshape(x.shape)
        theta = (t - self.times[n]) / (self.times[n + 1] - self.times[n])
        return self.field(x.reshape(-1, 2), n, theta).reshape(x.shape)


def simulate(
    state0: VortexState,
    dt: float,
    horizon: float,
    cfg: BlobKernelConfig | None = None,
    cfl: float = 0.5,
    boundary_tol: float = BOUNDARY_TOL,
    callback: Callable[[VortexState], None] | None = None,
    safety: float = 0.9,
    stops: Iterable[float] = (),
) -> Timeline:
    """Step from state0 to state0.t + horizon.

    Each step is min(dt, safety * stable_dt, time to the next stop), so the
    step shrinks only when the particle CFL limit requires it and every time
    in ``stops`` (and the horizon) is hit exactly by a snapshot.
    """
    tl = Timeline(state0, cfg)
    if horizon <= 0:
        return tl
    t_end = state0.t + horizon
    targets = sorted({float(x) for x in stops if state0.t < x < t_end} | {t_end})
    s = state0
    for target in targets:
        while target - s.t > 1e-12 * max(1.0, target):
            u = velocity(s.positions, s, cfg)
            h = min(dt, safety * stable_dt(s, u, cfl), target - s.t)
            if target - (s.t + h) < 1e-9 * h:
                h = target - s.t
            s = step(s, h, cfg, cfl, boundary_tol, u0=u)
            if abs(target - s.t) <= 1e-12 * max(1.0, target):
                object.__setattr__(s, "t", target)
            tl.append(s)
            if callback is not None:
                callback(s)
    tl.projections = s.meta.get("projections", 0)
    return tl


# -- tracers -------------------------------------------------------------------


def _rk4_piece(tl: Timeline, x: FloatArray, n: int, th0: float, th1: float) -> FloatArray:
    dtn = tl.times[n + 1] - tl.times[n] if len(tl.times) > 1 else 0.0
    h = (th1 - th0) * dtn
    thm = 0.5 * (th0 + th1)
    k1 = tl.field(x, n, th0)
    k2 = tl.field(x + 0.5 * h * k1, n, thm)
    k3 = tl.field(x + 0.5 * h * k2, n, thm)
    k4 = tl.field(x + h * k3, n, th1)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def advect(
    points: FloatArray,
    t0: float,
    t1: float,
    timeline: Timeline,
    substeps: int = 1,
    near_origin: float | None = None,
    boundary_tol: float | None = None,
) -> FloatArray:
    """Carry tracers from t0 to t1 (either direction) through the timeline.

    One RK4 step per snapshot interval (``substeps`` per interval if asked);
    tracers within ``near_origin`` blob radii of the origin take twice as many.
    ``near_origin`` and ``boundary_tol`` default to the timeline's settings.
    """
    near_origin = timeline.near_origin if near_origin is None else near_origin
    boundary_tol = timeline.boundary_tol if boundary_tol is None else boundary_tol
    x = np.array(as_points(points), dtype=np.float64).reshape(-1, 2)
    if t0 == t1 or len(x) == 0:
        return x
    timeline.index(t0)
    timeline.index(t1)
    if len(timeline) == 1:
        raise ValueError("timeline holds a single snapshot; nothing to integrate over")
    times = timeline.times
    forward = t1 > t0
    n = timeline.index(t0)
    if not forward and t0 == times[n] and n > 0:
        n -= 1
    while True:
        ta, tb = times[n], times[n + 1]
        dtn = tb - ta
        lo = max(min(t0, t1), ta)
        hi = min(max(t0, t1), tb)
        if hi > lo:
            th_start = ((lo if forward else hi) - ta) / dtn
            th_end = ((hi if forward else lo) - ta) / dtn
            eps0 = timeline.inner_core(n)
            fine = np.zeros(len(x), dtype=bool)
            if eps0 > 0:
                fine = np.sum(x * x, axis=1) < (near_origin * eps0) ** 2
            for mask, m in ((~fine, substeps), (fine, 2 * substeps)):
                if not np.any(mask):
                    continue
                xs = x[mask]
                for j in range(m):
                    a = th_start + (th_end - th_start) * j / m
                    b = th_start + (th_end - th_start) * (j + 1) / m
                    xs = _rk4_piece(timeline, xs, n, a, b)
                    xs, fixed = _project(xs, boundary_tol)
                x[mask] = xs
        if forward:
            if tb >= t1 or n + 1 >= len(times) - 1:
                break
            n += 1
        else:
            if ta <= t1 or n == 0:
                break
            n -= 1
    return x


@dataclass(frozen=True)
class FlowMapQuery:
    start_time: float
    duration: float
    seed: object  # points array or ContourCurve


def flow_map(q: FlowMapQuery, timeline: Timeline, **kw):
    """Phi_T^s applied to points or to a contour (the latter with refinement)."""
    if q.duration < 0:
        raise ValueError("flow map duration must be >= 0")
    end = q.start_time + q.duration
    if isinstance(q.seed, ContourCurve):
        c = q.seed if q.seed.time == q.start_time else replace(q.seed, time=q.start_time)
        return track_contour(c, timeline, end, **kw)
    pts = as_points(q.seed)
    if q.duration == 0:
        timeline.index(q.start_time)
        return np.array(pts, dtype=np.float64)
    return advect(pts, q.start_time, end, timeline, **kw).reshape(pts.shape)


def omega_at(
    x: FloatArray,
    t: float,
    timeline: Timeline,
    omega0: Callable[[FloatArray], FloatArray],
    substeps: int = 1,
) -> FloatArray:
    """omega(x, t) = omega0(foot of the backward characteristic through (x, t))."""
    pts = as_points(x)
    if t == timeline.t_start:
        return omega0(pts)
    foot = advect(pts.reshape(-1, 2), t, timeline.t_start, timeline, substeps=substeps)
    return omega0(foot).reshape(pts.shape[:-1])


# -- contours ------------------------------------------------------------------


def _polyline_fn(vertices: FloatArray, closed: bool) -> Callable[[FloatArray], FloatArray]:
    v = np.asarray(vertices, dtype=np.float64)
    if closed:
        v = np.vstack([v, v[:1]])
    seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)]) / np.sum(seg)

    def fn(u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=np.float64)
        if closed:
            u = np.mod(u, 1.0)
        return np.column_stack([np.interp(u, cum, v[:, 0]), np.interp(u, cum, v[:, 1])])

    return fn


def _arc_fn(theta0: float, theta1: float) -> Callable[[FloatArray], FloatArray]:
    def fn(u: FloatArray) -> FloatArray:
        th = theta0 + (theta1 - theta0) * np.asarray(u, dtype=np.float64)
        return np.column_stack([np.cos(th), 1.0 + np.sin(th)])

    return fn


def _concat_fn(parts: Sequence[Callable], closed: bool) -> Callable[[FloatArray], FloatArray]:
    k = len(parts)

    def fn(u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=np.float64)
        if closed:
            u = np.mod(u, 1.0)
        idx = np.minimum((u * k).astype(int), k - 1)
        local = u * k - idx
        out = np.empty((len(u), 2))
        for i, f in enumerate(parts):
            sel = idx == i
            if np.any(sel):
                out[sel] = f(local[sel])
        return out

    return fn


@dataclass
class ContourCurve:
    """Ordered markers of a transported material curve.

    ``params`` are the markers' coordinates along the seed curve at
    ``seeded_at``; new markers are created at parameter midpoints and
    re-advected from the seed so no interpolation error accumulates.
    """

    markers: FloatArray
    params: FloatArray
    seed_fn: Callable[[FloatArray], FloatArray] = field(repr=False)
    seeded_at: float = 0.0
    time: float = 0.0
    label: str = "custom"
    closed: bool = False
    h_max: float = 1e-2
    rel_x1: float | None = None  # also refine where |dx1| > rel_x1 * x1
    readvect_budget: int | None = None  # max markers x intervals re-advected per pass
    cap: int = 20000
    strict: bool = False
    truncated: bool = False
    interpolated: bool = False

    @classmethod
    def from_seed(cls, seed_fn, n: int, *, closed: bool = False, t: float = 0.0, **kw) -> "ContourCurve":
        u = np.arange(n) / n if closed else np.linspace(0.0, 1.0, n)
        return cls(markers=seed_fn(u), params=u, seed_fn=seed_fn, seeded_at=t, time=t,
                   closed=closed, **kw)

    @classmethod
    def polyline(cls, vertices, n: int, closed: bool = False, **kw) -> "ContourCurve":
        return cls.from_seed(_polyline_fn(as_points(vertices), closed), n, closed=closed, **kw)

    @classmethod
    def graded_segment(cls, p, q, n: int, grading: float = 0.0, **kw) -> "ContourCurve":
        """Segment p -> q with markers crowded geometrically toward p.

        ``grading`` is log10 of the ratio between the last and first gap.
        """
        p = np.asarray(p, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)

        def fn(u):
            u = np.asarray(u, dtype=np.float64)
            return p[None, :] + u[:, None] * (q - p)[None, :]

        if grading > 0:
            g = 10.0 ** (grading / max(1, n - 2))
            gaps = g ** np.arange(n - 1)
            u = np.concatenate([[0.0], np.cumsum(gaps)]) / np.sum(gaps)
        else:
            u = np.linspace(0.0, 1.0, n)
        t = kw.pop("t", 0.0)
        return cls(markers=fn(u), params=u, seed_fn=fn, seeded_at=t, time=t, **kw)

    @classmethod
    def boundary_arc(cls, x1_end: float, n: int, **kw) -> "ContourCurve":
        """Arc of the circle from the origin to the boundary point above x1_end."""
        th1 = math.atan2(math.sqrt(1.0 - x1_end**2) * -1.0, x1_end)  # angle around e2
        return cls.from_seed(_arc_fn(-0.5 * math.pi, th1), n, **kw)

    @property
    def n(self) -> int:
        return len(self.markers)

    def gaps(self) -> FloatArray:
        m = self.markers
        if self.closed:
            m = np.vstack([m, m[:1]])
        return np.linalg.norm(np.diff(m, axis=0), axis=1)

    def needs_refinement(self) -> np.ndarray:
        """Indices k whose gap to the next marker is too large."""
        g = self.gaps()
        bad = g > self.h_max
        if self.rel_x1 is not None:
            m = self.closed_markers() if self.closed else self.markers
            x1 = m[:, 0]
            dx = np.abs(np.diff(x1))
            scale = np.minimum(np.abs(x1[:-1]), np.abs(x1[1:]))
            bad |= dx > self.rel_x1 * scale
        return np.nonzero(bad)[0]

    def closed_markers(self) -> FloatArray:
        return np.vstack([self.markers, self.markers[:1]]) if self.closed else self.markers


def v_t_boundary(a: float, n_per_side: int = 64, t: float = 0.0, **kw) -> dict[str, ContourCurve]:
    """The four sides R1..R4 of V_T = (0, a)^2 cap D+, counter-clockwise from the origin."""
    bh = a * a / (1.0 + math.sqrt(1.0 - a * a))
    corners = [np.array([0.0, 0.0]), np.array([a, bh]), np.array([a, a]), np.array([0.0, a])]
    out = {"R1": ContourCurve.boundary_arc(a, n_per_side, label="R1", t=t, **kw)}
    for k in range(1, 4):
        out[f"R{k + 1}"] = ContourCurve.polyline([corners[k], corners[(k + 1) % 4]], n_per_side,
                                                 label=f"R{k + 1}", t=t, **kw)
    return out


def v_t_contour(a: float, n_per_side: int = 64, t: float = 0.0, **kw) -> ContourCurve:
    """Closed boundary of V_T as one contour (bottom side follows the circle)."""
    bh = a * a / (1.0 + math.sqrt(1.0 - a * a))
    th1 = math.atan2(-math.sqrt(1.0 - a * a), a)
    parts = [
        _arc_fn(-0.5 * math.pi, th1),
        _polyline_fn(np.array([[a, bh], [a, a]]), False),
        _polyline_fn(np.array([[a, a], [0.0, a]]), False),
        _polyline_fn(np.array([[0.0, a], [0.0, 0.0]]), False),
    ]
    fn = _concat_fn(parts, closed=True)
    return ContourCurve.from_seed(fn, 4 * n_per_side, closed=True, t=t, label="V_T", **kw)


def _catmull_rom_mid(m: FloatArray, k: np.ndarray, closed: bool) -> FloatArray:
    """Cubic (Catmull-Rom) midpoint of segments (k, k+1) from their neighbours."""
    n = len(m)
    if closed:
        i0, i1, i2, i3 = (k - 1) % n, k, (k + 1) % n, (k + 2) % n
    else:
        i0, i1, i2, i3 = np.maximum(k - 1, 0), k, k + 1, np.minimum(k + 2, n - 1)
    return (-m[i0] + 9 * m[i1] + 9 * m[i2] - m[i3]) / 16.0


class ContourTracker:
    """Advance a contour through a timeline with re-advected marker insertion.

    Optionally logs, per marker parameter, the first time the marker leaves
    the box (0, box)^2 and through which edge.
    """

    def __init__(self, contour: ContourCurve, timeline: Timeline, substeps: int = 1,
                 exit_box: float | None = None, max_passes: int = 12):
        self.c = replace(contour, markers=np.array(contour.markers, dtype=np.float64),
                         params=np.array(contour.params, dtype=np.float64))
        self.tl = timeline
        self.substeps = substeps
        self.exit_box = exit_box
        self.max_passes = max_passes
        self.exit_time = np.full(self.c.n, np.nan)
        self.exit_edge = np.full(self.c.n, "", dtype=object)
        if exit_box is not None:
            out = self._outside(self.c.markers)
            self.exit_time[out] = self.c.time
            self.exit_edge[out] = "initial"

    @property
    def contour(self) -> ContourCurve:
        return self.c

    def _outside(self, m: FloatArray) -> np.ndarray:
        return (m[:, 0] >= self.exit_box) | (m[:, 1] >= self.exit_box)

    def _log_exits(self) -> None:
        if self.exit_box is None:
            return
        m = self.c.markers
        out = self._outside(m)
        new = out & np.isnan(self.exit_time)
        self.exit_time[new] = self.c.time
        top = m[:, 1] >= self.exit_box
        right = m[:, 0] >= self.exit_box
        edge = np.where(top & right, "corner", np.where(top, "top", "right"))
        self.exit_edge[new] = edge[new]

    def exit_report(self) -> dict:
        done = ~np.isnan(self.exit_time)
        edges = self.exit_edge[done]
        return {
            "exited": int(np.count_nonzero(done & (self.exit_edge != "initial")
                                          & (self.exit_edge != "unknown"))),
            "top": int(np.count_nonzero(edges == "top")),
            "right": int(np.count_nonzero(edges == "right")),
            "corner": int(np.count_nonzero(edges == "corner")),
            "initial": int(np.count_nonzero(edges == "initial")),
            "unknown": int(np.count_nonzero(edges == "unknown")),
            "violations": int(np.count_nonzero(edges == "right")),
        }

    def _refine(self) -> None:
        c = self.c
        for _ in range(self.max_passes):
            gaps = c.gaps()
            bad = c.needs_refinement()
            if len(bad) == 0:
                return
            room = c.cap - c.n
            if room <= 0:
                if c.strict:
                    raise NumericalError(f"contour {c.label}: marker cap {c.cap} reached")
                c.truncated = True
                return
            if len(bad) > room:
                c.truncated = True
                if c.strict:
                    raise NumericalError(f"contour {c.label}: marker cap {c.cap} reached")
                bad = bad[np.argsort(-gaps[bad], kind="stable")[:room]]
                bad.sort()
            p_lo = c.params[bad]
            nxt = (bad + 1) % c.n
            p_hi = c.params[nxt]
            if c.closed:
                p_hi = np.where(nxt == 0, p_hi + 1.0, p_hi)
            mid = 0.5 * (p_lo + p_hi)
            if c.closed:
                mid = np.mod(mid, 1.0)
            intervals = sum(1 for x in self.tl.times if c.seeded_at < x <= c.time)
            if c.time == c.seeded_at:
                pts = c.seed_fn(mid)
            elif c.readvect_budget is not None and len(bad) * intervals > c.readvect_budget:
                pts = _catmull_rom_mid(c.markers, bad, c.closed)
                c.interpolated = True
            else:
                pts = advect(c.seed_fn(mid), c.seeded_at, c.time, self.tl, substeps=self.substeps)
            markers = np.insert(c.markers, bad + 1, pts, axis=0)
            params = np.insert(c.params, bad + 1, mid)
            # markers born outside the box have no observed exit
            born_out = self._outside(pts) if self.exit_box is not None else np.zeros(len(pts), bool)
            et = np.insert(self.exit_time, bad + 1, np.where(born_out, c.time, np.nan))
            ee = np.insert(self.exit_edge, bad + 1, np.where(born_out, "unknown", ""))
            c.markers, c.params = markers, params
            self.exit_time, self.exit_edge = et, ee

    def advance_to(self, t: float) -> ContourCurve:
        c = self.c
        if t < c.time:
            raise ValueError("contours are tracked forward in time only")
        times = self.tl.times
        stops = [s for s in times if c.time < s < t] + [t]
        for s in stops:
            if s == c.time:
                continue
            c.markers = advect(c.markers, c.time, s, self.tl, substeps=self.substeps)
            c.time = s
            self._log_exits()
            self._refine()
        return self.snapshot()

    def snapshot(self) -> ContourCurve:
        c = self.c
        return replace(c, markers=c.markers.copy(), params=c.params.copy())


def track_contour(c: ContourCurve, timeline: Timeline, until: float, substeps: int = 1,
                  record_times: Iterable[float] | None = None):
    """Transport a contour to ``until``; with ``record_times`` also return snapshots."""
    if until < c.time:
        raise ValueError("contour seeded after the requested time")
    tr = ContourTracker(c, timeline, substeps=substeps)
    shots = []
    for t in sorted(record_times or []):
        if c.time <= t <= until:
            shots.append(tr.advance_to(t))
    final = tr.advance_to(until)
    return (final, shots) if record_times is not None else final


# -- checkpoints ----------------------------------------------------------------

MAGIC = b"DVXCKPT\x00"
CHECKPOINT_VERSION = 1
_COLUMNS = ["x1", "x2", "omega", "weight", "core"]


def write_checkpoint(path: str | Path, state: VortexState) -> None:
    """Binary snapshot: magic, u16 version, u32 header length, JSON header,
    then an (n, 5) little-endian float64 table with columns x1 x2 omega weight core."""
    header = json.dumps({"t": float(state.t), "n": state.n, "columns": _COLUMNS},
                        sort_keys=True).encode()
    table = np.column_stack([state.positions, state.omega, state.weight, state.core])
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(table, dtype="<f8").tobytes())


def read_checkpoint(path: str | Path) -> VortexState:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, hlen = struct.unpack("<HI", fh.read(6))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(header["n"], len(header["columns"]))
    cols = {name: data[:, k] for k, name in enumerate(header["columns"])}
    return VortexState(t=header["t"], positions=np.column_stack([cols["x1"], cols["x2"]]),
                       omega=cols["omega"], weight=cols["weight"], core=cols["core"])
