import math
from dataclasses import replace

import numpy as np
import pytest

from discvortex.geometry import E2, SingularPointError, reflect_vertical
from discvortex.kernel import (
    BlobKernelConfig,
    bs_kernel,
    bs_kernel_odd,
    estimate_C_gamma,
    green,
    key_residual,
    residual_samples,
    sector_integral,
    velocity,
)
from discvortex.selfcheck import (
    axis_u1,
    divergence,
    green_boundary,
    green_harmonic,
    green_symmetry,
    sector_closed_form,
    tangency,
)
from discvortex.state import VortexState


def interior(rng, n, margin=0.05):
    r = (1 - margin) * np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(th), 1 + r * np.sin(th)])


def test_green_examples():
    assert green([0.3, 1.0], [0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    # at the center, by symmetry
    assert green(E2, [0.0, 1.5]) == pytest.approx(math.log(0.5) / (2 * math.pi), rel=1e-12)
    assert math.log(0.5) / (2 * math.pi) == pytest.approx(-0.110318, abs=1e-6)


def test_green_errors():
    with pytest.raises(SingularPointError):
        green([0.2, 0.5], [0.2, 0.5])
    with pytest.raises(SingularPointError):
        green([0.2, 0.5], E2)


def test_green_nonpositive_in_disc():
    rng = np.random.default_rng(4)
    x, y = interior(rng, 500), interior(rng, 500)
    assert np.all(green(x, y) <= 0)


@pytest.mark.parametrize("check", [green_boundary, green_symmetry, green_harmonic])
def test_green_properties(check):
    r = check()
    assert r.passed, r.detail


def test_bs_kernel_is_rotated_gradient_of_green():
    rng = np.random.default_rng(5)
    x, y = interior(rng, 100), interior(rng, 100)
    keep = np.linalg.norm(x - y, axis=1) > 0.1
    x, y = x[keep], y[keep]
    h = 1e-6
    gx = (green(x + [h, 0], y) - green(x - [h, 0], y)) / (2 * h)
    gy = (green(x + [0, h], y) - green(x - [0, h], y)) / (2 * h)
    perp = np.column_stack([-gy, gx])
    assert np.max(np.abs(bs_kernel(x, y) - (-2 * np.pi * perp))) <= 1e-6 * max(1, np.max(np.abs(perp)))


def test_bs_kernel_singular_at_coincidence():
    with pytest.raises(SingularPointError):
        bs_kernel([0.1, 0.5], [0.1, 0.5])


def test_bs_kernel_tangent_on_boundary():
    rng = np.random.default_rng(6)
    th = 2 * np.pi * rng.random(100)
    xb = np.column_stack([np.cos(th), 1 + np.sin(th)])
    y = interior(rng, 100)
    k = bs_kernel(xb, y)
    assert np.max(np.abs(np.sum(k * (xb - E2), axis=1))) <= 1e-10


def test_bs_kernel_odd_identity_and_axis():
    rng = np.random.default_rng(7)
    y = interior(rng, 200)
    y[:, 0] = np.abs(y[:, 0]) + 1e-3
    x = interior(rng, 200)
    assert np.allclose(bs_kernel_odd(x, y), bs_kernel(x, y) - bs_kernel(x, reflect_vertical(y)),
                       rtol=0, atol=0)
    xa = np.column_stack([np.zeros(200), 2 * rng.random(200) * 0.999 + 1e-3])
    assert np.max(np.abs(bs_kernel_odd(xa, y)[:, 0])) == 0.0


def test_velocity_empty_state():
    assert np.array_equal(velocity([0.2, 0.3], VortexState.empty()), [0.0, 0.0])


def test_velocity_reflection_equivariance(small_state):
    rng = np.random.default_rng(8)
    x = interior(rng, 50)
    u = velocity(x, small_state)
    v = velocity(reflect_vertical(x), small_state)
    assert np.allclose(v, np.column_stack([-u[:, 0], u[:, 1]]), rtol=0, atol=1e-14)


def test_velocity_matches_exact_kernel_far_from_cores():
    pos = np.array([[0.3, 0.6], [0.5, 1.2]])
    s = VortexState(t=0, positions=pos, omega=[1.0, 0.5], weight=[0.01, 0.02], core=[1e-3, 1e-3])
    x = np.array([[0.1, 0.9], [0.6, 0.8]])
    exact = sum(bs_kernel_odd(x, p) * w * o for p, w, o in zip(pos, s.weight, s.omega)) / (2 * np.pi)
    assert np.allclose(velocity(x, s), exact, rtol=1e-12, atol=1e-15)


def test_blob_config_validation():
    with pytest.raises(ValueError):
        BlobKernelConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        BlobKernelConfig(cutoff_rule="gauss")


def test_velocity_field_properties(small_state):
    for check in (tangency, axis_u1, divergence):
        r = check(small_state)
        assert r.passed, r.detail


def test_sector_integral_zero_vorticity(zero_state):
    assert sector_integral([0.1, 0.1], zero_state) == pytest.approx(0.0, abs=0)


@pytest.mark.parametrize("r0", [1e-2, 1e-4])
def test_sector_closed_form(r0):
    assert sector_closed_form(r0).passed


def test_sector_integral_monotone(unit_state):
    x = np.array([[0.05, 0.05], [0.1, 0.05], [0.05, 0.1], [0.2, 0.2]])
    v = sector_integral(x, unit_state)
    assert v[1] <= v[0] and v[2] <= v[0] and v[3] <= min(v[1], v[2])


def test_key_residual_zero_vorticity(zero_state):
    d = key_residual([0.1, 0.1], zero_state, 1)
    assert d.residual(1) == 0.0 and d.residual(2) == 0.0


def test_key_residual_identity_and_errors(unit_state):
    for r in (0.1, 0.05, 0.025, 0.0125):
        d = key_residual([r, r], unit_state, 2)
        for j in (1, 2):
            assert d.reconstruct(j) == pytest.approx(d.u[j - 1], rel=1e-12)
    with pytest.raises(ValueError):
        key_residual([0.0, 0.5], unit_state, 1)
    with pytest.raises(ValueError):
        key_residual([0.01, 0.5], unit_state, 1)
    d = key_residual([0.01, 0.5], unit_state, 2)
    with pytest.raises(ValueError):
        d.residual(1)


def test_key_residual_bounded_while_ratio_grows(unit_state):
    radii = [0.1, 0.05, 0.025, 0.0125]
    ds = [key_residual([r, r], unit_state, 1) for r in radii]
    B = [abs(d.residual(1)) for d in ds]
    U = [abs(d.u[0]) / d.at_point[0] for d in ds]
    dB = np.abs(np.diff(B))
    dU = np.diff(U)
    # B settles (shrinking increments) while u/x keeps gaining a fixed amount per halving
    assert np.all(dB[1:] < dB[:-1])
    assert np.all(dU >= 0.8 * math.log(2) / math.pi)


def test_C_gamma(zero_state, small_state):
    assert estimate_C_gamma(0.5, zero_state) == 0.0
    coarse = estimate_C_gamma(0.5, small_state, {"k_min": 3, "k_max": 10, "n_angles": 8})
    fine = estimate_C_gamma(0.5, small_state, {"k_min": 3, "k_max": 10, "n_angles": 16})
    # n_angles=16 contains the 8-angle nodes only approximately; compare against a true subset
    s = residual_samples(0.5, small_state, k_min=3, k_max=10, n_angles=16)
    sub = np.max(np.abs(s.residual[::2])) / small_state.omega_sup()
    assert fine >= sub
    assert abs(fine - coarse) / fine < 0.1
    with pytest.raises(ValueError):
        estimate_C_gamma(0.0, small_state)


def test_log_bound_on_u1(small_state):
    C_hat = estimate_C_gamma(0.5, small_state)
    rng = np.random.default_rng(9)
    x1 = 10 ** rng.uniform(-3, -1, 200)
    x2 = x1 * rng.uniform(0.05, 1.0, 200)
    x = np.column_stack([x1, x2])
    u1 = velocity(x, small_state)[:, 0]
    rhs = (4 / np.pi) * small_state.omega_sup() * (
        np.log(2) - np.log(np.linalg.norm(x, axis=1)) + C_hat) * x1
    assert np.all(np.abs(u1) <= rhs)


def test_uniform_epsilon_override(small_state):
    cfg = BlobKernelConfig(epsilon=0.01)
    assert np.all(cfg.cores(small_state) == 0.01)
    u = velocity([[0.0, 0.5]], small_state, cfg)
    assert abs(u[0, 0]) <= 1e-12
    assert replace(small_state).n == small_state.n
