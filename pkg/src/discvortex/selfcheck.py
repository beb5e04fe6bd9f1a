"""Property suite for the Green's function, the particle velocity and the key lemma."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import E2
from .initial_data import ScenarioParams, VorticityFunction, build_omega0, discretize
from .kernel import (
    BlobKernelConfig,
    green,
    key_residual,
    polar_graded_quadrature,
    velocity,
)
from .state import VortexState


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


def _check(name: str, value: float, limit: float, below: bool = True, detail: str = "") -> CheckResult:
    ok = value <= limit if below else value >= limit
    rel = "<=" if below else ">="
    return CheckResult(name, bool(ok), float(value), float(limit),
                       detail or f"{value:.3e} {rel} {limit:.3e}")


def _interior_points(rng: np.random.Generator, n: int, margin: float = 0.05) -> np.ndarray:
    r = (1.0 - margin) * np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(th), 1.0 + r * np.sin(th)])


# -- Green's function ----------------------------------------------------------------


def green_boundary(n_boundary: int = 100, n_sources: int = 10, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    th = 2 * np.pi * rng.random(n_boundary)
    xb = np.column_stack([np.cos(th), 1.0 + np.sin(th)])
    ys = _interior_points(rng, n_sources)
    g = green(xb[:, None, :], ys[None, :, :])
    return _check("green_boundary", float(np.max(np.abs(g))), 1e-10)


def green_symmetry(n_pairs: int = 100, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    x = _interior_points(rng, n_pairs)
    y = _interior_points(rng, n_pairs)
    return _check("green_symmetry", float(np.max(np.abs(green(x, y) - green(y, x)))), 1e-10)


def green_harmonic(n_points: int = 100, h: float = 1e-3, seed: int = 2,
                   min_dist: float = 0.4) -> CheckResult:
    """Five-point Laplacian of G(., y) at points at least ``min_dist`` from y and its image."""
    rng = np.random.default_rng(seed)
    y = np.array([0.1, 0.7])
    pts = _interior_points(rng, 20 * n_points, margin=2 * h + 1e-3)
    ybar = E2 + (y - E2) / np.sum((y - E2) ** 2)
    far = (np.linalg.norm(pts - y, axis=1) > min_dist) & (np.linalg.norm(pts - ybar, axis=1) > min_dist)
    pts = pts[far][:n_points]
    c = green(pts, y)
    lap = (green(pts + [h, 0], y) + green(pts - [h, 0], y) + green(pts + [0, h], y)
           + green(pts - [0, h], y) - 4 * c) / (h * h)
    worst = float(np.max(np.abs(lap)))
    return _check("green_harmonic", worst, 10 * h * h, detail=f"max|lap_h G|={worst:.3e} <= 10h^2={10*h*h:.1e}")


# -- velocity field -------------------------------------------------------------------


def scenario_state(N: int = 4000, delta: float = 0.05, constant: float | None = None) -> VortexState:
    p = ScenarioParams(delta=delta, relaxed_mode=True, resolution_N=N)
    f = build_omega0(p)
    s = discretize(f, p)
    if constant is not None:
        from dataclasses import replace

        s = replace(s, omega=VorticityFunction.constant_value(constant)(s.positions))
    return s


def _umax(state: VortexState, cfg) -> float:
    return float(np.max(np.linalg.norm(velocity(state.positions, state, cfg), axis=1)))


def tangency(state: VortexState, cfg: BlobKernelConfig | None = None, n: int = 400) -> CheckResult:
    th = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n)
    xb = np.column_stack([np.cos(th), 1.0 + np.sin(th)])
    normal = xb - E2
    u = velocity(xb, state, cfg)
    un = float(np.max(np.abs(np.sum(u * normal, axis=1))))
    scale = _umax(state, cfg)
    return _check("velocity_tangency", un / scale, 1e-8, detail=f"max|u.n|/max|u| = {un / scale:.3e}")


def axis_u1(state: VortexState, cfg: BlobKernelConfig | None = None, n: int = 200) -> CheckResult:
    x2 = np.geomspace(1e-8, 2.0 - 1e-8, n)
    u = velocity(np.column_stack([np.zeros(n), x2]), state, cfg)
    return _check("velocity_axis_u1", float(np.max(np.abs(u[:, 0]))), 1e-12)


def divergence(state: VortexState, cfg: BlobKernelConfig | None = None, n: int = 200,
               seed: int = 3, rel_step: float = 1e-6) -> CheckResult:
    """Centered finite-difference divergence at points whose stencil crosses no core edge.

    Cores overlap, so no point lies outside all of them; the regularized
    field is smooth except for a gradient kink on each core circle.
    """
    rng = np.random.default_rng(seed)
    cfg = cfg or BlobKernelConfig()
    cores = cfg.cores(state)
    y = np.asarray(state.positions)
    cand = _interior_points(rng, 40 * n)
    cand = cand[cand[:, 0] > 0]
    keep = []
    for p in cand:
        h = rel_step * max(np.linalg.norm(p), 1e-3)
        ok = True
        for img in (y, y * [-1, 1]):
            if np.any(np.abs(np.linalg.norm(img - p, axis=1) - cores) <= 4 * h):
                ok = False
                break
        if ok:
            keep.append(p)
        if len(keep) == n:
            break
    pts = np.array(keep).reshape(-1, 2)
    h = rel_step * np.maximum(np.linalg.norm(pts, axis=1), 1e-3)[:, None]
    ex = np.array([1.0, 0.0])
    ey = np.array([0.0, 1.0])
    div = ((velocity(pts + h * ex, state, cfg)[:, 0] - velocity(pts - h * ex, state, cfg)[:, 0])
           + (velocity(pts + h * ey, state, cfg)[:, 1] - velocity(pts - h * ey, state, cfg)[:, 1])) / (2 * h[:, 0])
    scale = _umax(state, cfg)
    v = float(np.max(np.abs(div)) / scale)
    return _check("velocity_divergence", v, 1e-6, detail=f"max|div_h u|/max|u| = {v:.3e} at {len(pts)} pts")


# -- key lemma ---------------------------------------------------------------------------


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(x, y, 1)[0])


def lemma_slopes(state: VortexState, cfg: BlobKernelConfig | None = None,
                 k_min: int = 3, k_max: int = 14) -> list[CheckResult]:
    """On x = (r, r): |B_j| flat in |ln r|, |u_j|/x_j growing, identity exact."""
    radii = 2.0 ** -np.arange(k_min, k_max + 1, dtype=float)
    L = -np.log(radii)
    out = []
    ident = 0.0
    coeff = 0.8 * (4 / math.pi) * 0.25
    for j in (1, 2):
        decs = [key_residual([r, r], state, j, cfg) for r in radii]
        B = np.array([d.residual(j) for d in decs])
        U = np.array([abs(d.u[j - 1]) / d.at_point[j - 1] for d in decs])
        for d in decs:
            ident = max(ident, abs(d.reconstruct(j) - d.u[j - 1]) / max(abs(d.u[j - 1]), 1e-300))
        out.append(_check(f"lemma_B{j}_slope", abs(_slope(L, np.abs(B))), 0.05))
        out.append(_check(f"lemma_u{j}_slope", _slope(L, U), coeff, below=False))
    out.append(_check("lemma_identity", ident, 1e-12))
    return out


def sector_closed_form(r0: float) -> CheckResult:
    val = polar_graded_quadrature(lambda r, p: np.sin(2 * p) / (2 * r), r0, 1.0, math.pi / 6, math.pi / 3)
    exact = 0.25 * abs(math.log(r0))
    rel = abs(val - exact) / exact
    return _check(f"sector_closed_form_r0={r0:g}", rel, 0.01)


def run_kernel_suite(kt=None, cfg: BlobKernelConfig | None = None) -> list[CheckResult]:
    n_boundary = getattr(kt, "n_boundary", 100)
    n_sources = getattr(kt, "n_sources", 10)
    n_pairs = getattr(kt, "n_pairs", 100)
    seed = getattr(kt, "seed", 0)
    N = getattr(kt, "resolution_N", 4000)
    delta = getattr(kt, "delta", 0.05)
    res = [
        green_boundary(n_boundary, n_sources, seed),
        green_harmonic(seed=seed + 2),
        green_symmetry(n_pairs, seed + 1),
    ]
    ramp = scenario_state(N, delta)
    res += [tangency(ramp, cfg), axis_u1(ramp, cfg), divergence(ramp, cfg, seed=seed + 3)]
    res += lemma_slopes(scenario_state(N, delta, constant=1.0), cfg)
    res += [sector_closed_form(1e-2), sector_closed_form(1e-4)]
    return res
