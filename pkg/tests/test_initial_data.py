import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discvortex.geometry import in_disc
from discvortex.initial_data import (
    ResolutionError,
    ScenarioParams,
    VorticityFunction,
    build_omega0,
    delta_of,
    discretize,
    exceptional_measure,
    grid_count,
    polar_grid,
    ratio_for_count,
    smoothstep,
)


def test_delta_of_examples():
    assert delta_of(1, 1) == pytest.approx(0.25 * math.exp(-8), rel=1e-15)
    assert delta_of(1, 1) == pytest.approx(8.38657e-5, rel=1e-5)
    assert delta_of(1, 0) == pytest.approx(4.57891e-3, rel=1e-5)
    with pytest.raises(ValueError):
        delta_of(0.5, 1)
    with pytest.raises(ValueError):
        delta_of(1, -1)


@settings(max_examples=100, deadline=None)
@given(st.floats(1, 10), st.floats(0, 10), st.floats(1e-3, 1))
def test_delta_of_decreasing(A, C, h):
    assert delta_of(A + h, C) < delta_of(A, C)
    assert delta_of(A, C + h) < delta_of(A, C)


def test_params_validation():
    assert ScenarioParams().delta == pytest.approx(delta_of(1, 1))
    with pytest.raises(ValueError):
        ScenarioParams(delta=0.05)
    with pytest.raises(ValueError):
        ScenarioParams(delta=0.3, relaxed_mode=True)
    with pytest.raises(ValueError):
        ScenarioParams(delta=0.05, relaxed_mode=True, ramp_width=0.05**2 / 2)
    with pytest.raises(ValueError):
        ScenarioParams(epsilon=0)
    with pytest.raises(ValueError):
        ScenarioParams(dt=-1)
    p = ScenarioParams(delta=0.05, relaxed_mode=True)
    assert p.ramp_width == pytest.approx(0.05**2 / 4)


def test_omega0_examples(small_params, small_omega0):
    d = small_params.delta
    x2 = np.linspace(0, 2, 50)
    assert np.all(small_omega0(np.column_stack([np.zeros(50), x2])) == 0)
    assert small_omega0([d, d / 2]) == 1.0


def test_omega0_one_on_corner_set(small_params, small_omega0):
    d = small_params.delta
    rng = np.random.default_rng(0)
    x1 = rng.uniform(d**2, d, 10000)
    x2 = x1 * rng.random(10000)
    p = np.column_stack([x1, x2])
    p = p[in_disc(p)]
    assert np.all(small_omega0(p) == 1.0)


def test_omega0_odd_and_range(small_omega0):
    rng = np.random.default_rng(1)
    r = np.sqrt(rng.random(100000))
    th = 2 * np.pi * rng.random(100000)
    p = np.column_stack([r * np.cos(th), 1 + r * np.sin(th)])
    w = small_omega0(p)
    q = p * [-1, 1]
    assert np.array_equal(small_omega0(q), -w)
    right = p[:, 0] > 0
    assert np.all((w[right] >= 0) & (w[right] <= 1))
    assert np.max(np.abs(w)) == 1.0


def test_exceptional_measure(small_params, small_omega0):
    est, err = exceptional_measure(small_omega0, 10**6, seed=0)
    assert est + 3 * err <= small_params.delta**2


def test_ramp_smoothness():
    f = VorticityFunction(rho0=0.5, rho1=1.0)
    x = np.linspace(0.3, 1.2, 9001)
    h = x[1] - x[0]
    d2 = np.diff(f.profile(x), 2) / h**2
    assert np.all(np.isfinite(d2))
    # continuous: neighbouring second differences never jump
    assert np.max(np.abs(np.diff(d2))) < 0.05 * np.max(np.abs(d2))
    assert np.all(np.diff(f.profile(x)) >= 0)
    assert smoothstep(np.array([0.0]))[0] == 0 and smoothstep(np.array([1.0]))[0] == 1


def test_level_x1(small_omega0):
    x = small_omega0.level_x1(0.99)
    assert small_omega0.rho0 < x < small_omega0.rho1
    assert float(small_omega0.profile(np.array(x))) == pytest.approx(0.99, abs=1e-12)
    with pytest.raises(ValueError):
        VorticityFunction.constant_value(1.0).level_x1(0.5)


def test_polar_grid_weights_sum_to_half_disc():
    for ratio in (1.05, 1.2, 1.5):
        pos, w = polar_grid(1e-6, ratio)
        assert w.sum() == pytest.approx(math.pi / 2, abs=1e-12)
        assert len(pos) == grid_count(1e-6, ratio)
        assert np.all(pos[:, 0] >= 0) and np.all(in_disc(pos, closed=True))


def test_ratio_for_count_hits_target():
    r = ratio_for_count(4000, 1e-6)
    assert abs(grid_count(1e-6, r) - 4000) < 40


def test_discretize(small_params, small_omega0, small_state):
    assert small_state.weight.sum() == pytest.approx(math.pi / 2, abs=1e-6)
    one = discretize(VorticityFunction.constant_value(1.0), small_params)
    assert one.strength.sum() == pytest.approx(math.pi / 2, abs=1e-6)
    zero = discretize(VorticityFunction.constant_value(0.0), small_params)
    assert np.all(zero.omega == 0)
    assert np.array_equal(small_state.omega, small_omega0(small_state.positions))


def test_discretize_resolution_error():
    p = ScenarioParams(delta=0.05, relaxed_mode=True, resolution_N=200, rho_min=1e-3)
    with pytest.raises(ResolutionError):
        discretize(build_omega0(p), p)
    strict = ScenarioParams(resolution_N=4000)
    with pytest.raises(ResolutionError):
        discretize(build_omega0(strict), strict)


def test_grid_sector_quadrature():
    pos, w = polar_grid(1e-8, 1.05)
    r = np.linalg.norm(pos, axis=1)
    phi = np.arctan2(pos[:, 1], pos[:, 0])
    r0 = 1e-2
    sel = (r >= r0) & (r <= 1) & (phi >= math.pi / 6) & (phi <= math.pi / 3)
    val = np.sum(pos[sel, 0] * pos[sel, 1] / r[sel] ** 4 * w[sel])
    assert val == pytest.approx(0.25 * abs(math.log(r0)), rel=0.01)
