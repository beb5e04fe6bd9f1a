"""Compiled pair sums over particles.

Each target's sum runs over the sources in index order inside a single
call, so results do not depend on how targets are split across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numba as nb
import numpy as np

_THREADS = 1

# src rows: y1, y2, ybar1, ybar2, core^2, image core^2, strength
N_SRC_ROWS = 7


def set_threads(n: int) -> None:
    global _THREADS
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = int(n)


def get_threads() -> int:
    return _THREADS


def prepare_sources(positions: np.ndarray, core: np.ndarray, strength: np.ndarray) -> np.ndarray:
    """Pack source data, including the inverted image points, into one array."""
    y1 = positions[:, 0]
    y2 = positions[:, 1]
    dy = y2 - 1.0
    q = y1 * y1 + dy * dy
    # within 1e-100 of e2 the image sits beyond 1e100 and contributes nothing
    center = q < 1e-200
    qs = np.where(center, 1.0, q)
    b1 = np.where(center, 0.0, y1 / qs)
    # a source at e2 has its image at infinity; park it far away
    b2 = np.where(center, 1e150, 1.0 + dy / qs)
    c2 = core * core
    ci2 = np.where(center, 0.0, c2 / qs)
    return np.ascontiguousarray(np.stack([y1, y2, b1, b2, c2, ci2, strength]))


@nb.njit(nogil=True, fastmath=True, error_model="numpy", cache=True)
def _velocity_block(tx, src, out):
    y1a = src[0]
    y2a = src[1]
    b1a = src[2]
    b2a = src[3]
    c2a = src[4]
    ci2a = src[5]
    sa = src[6]
    n = src.shape[1]
    inv2pi = 1.0 / (2.0 * math.pi)
    for m in range(tx.shape[0]):
        x1 = tx[m, 0]
        x2 = tx[m, 1]
        u1 = 0.0
        u2 = 0.0
        for i in range(n):
            dm = x1 - y1a[i]
            dp = x1 + y1a[i]
            d2 = x2 - y2a[i]
            rd = 1.0 / max(dm * dm + d2 * d2, c2a[i])
            rr = 1.0 / max(dp * dp + d2 * d2, c2a[i])
            im = x1 - b1a[i]
            ip = x1 + b1a[i]
            i2 = x2 - b2a[i]
            ri = 1.0 / max(im * im + i2 * i2, ci2a[i])
            rj = 1.0 / max(ip * ip + i2 * i2, ci2a[i])
            s = sa[i]
            u1 += s * (d2 * (rd - rr) - i2 * (ri - rj))
            u2 += s * ((dp * rr - dm * rd) + (im * ri - ip * rj))
        out[m, 0] = u1 * inv2pi
        out[m, 1] = u2 * inv2pi


@nb.njit(nogil=True, fastmath=True, error_model="numpy", cache=True)
def _energy_block(tx, tw, src, out):
    y1a = src[0]
    y2a = src[1]
    b1a = src[2]
    b2a = src[3]
    c2a = src[4]
    ci2a = src[5]
    sa = src[6]
    n = src.shape[1]
    inv4pi = 1.0 / (4.0 * math.pi)
    for m in range(tx.shape[0]):
        x1 = tx[m, 0]
        x2 = tx[m, 1]
        acc = 0.0
        for i in range(n):
            dm = x1 - y1a[i]
            dp = x1 + y1a[i]
            d2 = x2 - y2a[i]
            im = x1 - b1a[i]
            ip = x1 + b1a[i]
            i2 = x2 - b2a[i]
            g = (
                math.log(max(dm * dm + d2 * d2, c2a[i]))
                - math.log(max(dp * dp + d2 * d2, c2a[i]))
                - math.log(max(im * im + i2 * i2, ci2a[i]))
                + math.log(max(ip * ip + i2 * i2, ci2a[i]))
            )
            acc += sa[i] * g
        out[m] = tw[m] * acc * inv4pi


def _chunks(m: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, -(-m // workers))
    return [(a, min(m, a + size)) for a in range(0, m, size)]


def _run(fn, m: int, threads: int | None) -> None:
    workers = threads or _THREADS
    parts = _chunks(m, workers)
    if workers == 1 or len(parts) <= 1:
        for a, b in parts:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda ab: fn(*ab), parts))


def velocity_sum(targets: np.ndarray, src: np.ndarray, threads: int | None = None) -> np.ndarray:
    tx = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 2)
    out = np.zeros_like(tx)
    if src.shape[1] == 0 or tx.shape[0] == 0:
        return out

    def work(a: int, b: int) -> None:
        _velocity_block(tx[a:b], src, out[a:b])

    _run(work, tx.shape[0], threads)
    return out


def energy_sum(targets: np.ndarray, target_strength: np.ndarray, src: np.ndarray,
               threads: int | None = None) -> float:
    tx = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 2)
    tw = np.ascontiguousarray(target_strength, dtype=np.float64)
    out = np.zeros(tx.shape[0])
    if src.shape[1] == 0 or tx.shape[0] == 0:
        return 0.0

    def work(a: int, b: int) -> None:
        _energy_block(tx[a:b], tw[a:b], src, out[a:b])

    _run(work, tx.shape[0], threads)
    return float(np.sum(out))
