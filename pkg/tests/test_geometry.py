import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discvortex.geometry import (
    E2,
    Sector,
    SingularPointError,
    boundary_height,
    in_disc,
    in_quadrant,
    in_right_half,
    in_sector,
    invert,
    on_boundary,
    project_to_disc,
    reflect_vertical,
)


def random_interior(rng, n, margin=1e-3):
    r = (1 - margin) * np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(th), 1 + r * np.sin(th)])


def test_reflect_examples():
    assert np.array_equal(reflect_vertical([0.3, 0.5]), [-0.3, 0.5])
    assert np.array_equal(reflect_vertical([0.0, 1.2]), [0.0, 1.2])


def test_reflect_maps_right_half_to_left_half():
    p = random_interior(np.random.default_rng(0), 1000)
    p = p[in_right_half(p)]
    q = reflect_vertical(p)
    assert np.all(q[:, 0] < 0) and np.all(in_disc(q))
    assert np.array_equal(reflect_vertical(q), p)


def test_invert_examples():
    assert np.allclose(invert([0.0, 0.0]), [0.0, 0.0], atol=0)
    assert np.allclose(invert([0.0, 1.5]), [0.0, 3.0], rtol=1e-15)
    with pytest.raises(SingularPointError):
        invert(E2)


def test_invert_involution_on_interior():
    p = random_interior(np.random.default_rng(1), 1000)
    p = p[np.linalg.norm(p - E2, axis=1) > 1e-3]
    assert np.max(np.abs(invert(invert(p)) - p)) <= 1e-12


def test_invert_fixes_boundary():
    th = np.linspace(0, 2 * np.pi, 500)
    b = np.column_stack([np.cos(th), 1 + np.sin(th)])
    assert np.max(np.abs(invert(b) - b)) <= 1e-12
    assert np.all(on_boundary(b))


def test_sector_examples():
    s1, s2 = Sector(0.5, 1), Sector(0.5, 2)
    assert in_sector([0.5, 0.5], s1)
    assert not in_sector([0.01, 0.5], s1)
    assert in_sector([0.5, 0.5], s2)


def test_sector_is_strict():
    assert not in_sector([0.25, 0.5], Sector(0.5, 1))


def test_sector_rejects_bad_parameters():
    with pytest.raises(ValueError):
        Sector(0.0, 1)
    with pytest.raises(ValueError):
        Sector(0.5, 3)


def test_quadrant_examples():
    x = np.array([0.1, 0.1])
    assert in_quadrant([0.5, 0.5], x)
    assert not in_quadrant([0.05, 0.5], x)
    assert in_quadrant(x, x)


def test_boundary_height_small_argument():
    x = np.array([1e-9, 1e-3, 0.5])
    exact = 1 - np.sqrt(1 - x * x)
    assert np.allclose(boundary_height(x)[1:], exact[1:], rtol=1e-9)
    assert boundary_height(1e-9) == pytest.approx(0.5e-18, rel=1e-12)


def test_project_to_disc():
    p = np.array([[0.0, 1.0 - 1.0 - 1e-10], [-1e-10, 0.5], [0.3, 0.7]])
    q, k = project_to_disc(p, 1e-8)
    assert k == 2
    assert q[1, 0] == 0.0
    assert np.array_equal(q[2], p[2])
    with pytest.raises(ValueError):
        project_to_disc([[0.0, 2.1]], 1e-8)
    with pytest.raises(ValueError):
        project_to_disc([[-0.01, 0.5]], 1e-8)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.999), st.floats(0, 2 * np.pi))
def test_invert_maps_interior_outside(r, th):
    p = E2 + r * np.array([np.cos(th), np.sin(th)])
    if r < 1e-6:
        return
    q = invert(p)
    assert np.linalg.norm(q - E2) == pytest.approx(1 / r, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1.0), st.floats(1e-6, 2.0), st.floats(0.05, 5.0))
def test_sectors_cover_right_half_for_small_gamma(x1, x2, gamma):
    p = np.array([x1, x2])
    if not in_right_half(p):
        return
    a = bool(in_sector(p, Sector(gamma, 1)))
    b = bool(in_sector(p, Sector(gamma, 2)))
    if gamma < 1:
        assert a or b
    assert a == (x1 > gamma * x2)
