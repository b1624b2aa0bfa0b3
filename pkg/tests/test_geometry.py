import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import grid_projection
from dbandit.errors import InputError, UsageError
from dbandit.geometry import (Box, L1Ball, L2Ball, constraint_from_config, diameter,
                              feasible_grid, linear_minimize, project)

coords = st.floats(-20, 20, allow_nan=False)
vec3 = arrays(float, 3, elements=coords)
SETS = [Box([-3.0, -1.0, 0.0], [3.0, 2.0, 0.5]), L1Ball(3.0, 3), L2Ball(2.0, 3)]


def test_box_clamps():
    assert np.array_equal(project(Box.cube(3, 2), [5.0, -4.0]), [3.0, -3.0])


def test_l1_projection_example():
    out = project(L1Ball(3.0, 2), [2.0, 2.0])
    np.testing.assert_allclose(out, [1.5, 1.5], atol=1e-15)
    # brute force over a fine grid of the ball
    np.testing.assert_allclose(grid_projection(np.array([2.0, 2.0]), 3.0, 0.005), out, atol=0.005)


@pytest.mark.parametrize("v", [[4.0, 0.5], [-1.0, 5.0], [2.5, -2.5], [0.1, -3.2]])
def test_l1_projection_matches_grid(v):
    v = np.array(v)
    h = 0.005
    np.testing.assert_allclose(project(L1Ball(3.0, 2), v), grid_projection(v, 3.0, h),
                               atol=h * np.sqrt(2))


def test_projection_idempotent_on_feasible(any_set):
    x = any_set.center() + 0.1
    assert any_set.contains(x)
    np.testing.assert_array_equal(project(any_set, x), x)


def test_projection_stack_matches_rowwise(rng):
    s = L1Ball(2.0, 4)
    P = rng.normal(scale=3, size=(7, 4))
    np.testing.assert_allclose(s.project(P), np.array([s.project(p) for p in P]))


@pytest.mark.parametrize("s", SETS, ids=["box", "l1", "l2"])
@settings(max_examples=200, deadline=None)
@given(p=vec3, z_raw=vec3)
def test_projection_optimality_certificate(s, p, z_raw):
    xp = s.project(p)
    z = s.project(z_raw)
    assert s.contains(xp, tol=1e-9)
    assert (p - xp) @ (z - xp) <= 1e-9 * (1 + np.abs(p).sum() ** 2)


@pytest.mark.parametrize("s", SETS, ids=["box", "l1", "l2"])
@settings(max_examples=200, deadline=None)
@given(a=vec3, b=vec3)
def test_projection_nonexpansive(s, a, b):
    assert np.linalg.norm(s.project(a) - s.project(b)) <= np.linalg.norm(a - b) + 1e-12


def test_linear_minimize_examples():
    np.testing.assert_array_equal(linear_minimize(L1Ball(3.0, 2), [1.0, -2.0]), [0.0, 3.0])
    np.testing.assert_array_equal(linear_minimize(Box.cube(3, 2), [1.0, -2.0]), [-3.0, 3.0])
    np.testing.assert_allclose(linear_minimize(L2Ball(3.0, 2), [3.0, 4.0]), [-1.8, -2.4])


def test_linear_minimize_zero_direction_gives_center(any_set):
    x = linear_minimize(any_set, np.zeros(any_set.dim))
    np.testing.assert_array_equal(x, any_set.center())


def test_l1_linear_minimize_tie_lowest_index():
    np.testing.assert_array_equal(linear_minimize(L1Ball(1.0, 3), [-2.0, 2.0, 1.0]),
                                  [1.0, 0.0, 0.0])


@pytest.mark.parametrize("s", SETS, ids=["box", "l1", "l2"])
def test_linear_minimize_beats_random_feasible(s, rng):
    for _ in range(5):
        c = rng.normal(size=s.dim)
        x = s.linear_minimize(c)
        assert s.contains(x)
        Z = s.project(rng.normal(scale=4, size=(1000, s.dim)))
        assert c @ x <= (Z @ c).min() + 1e-12


def test_box_linear_minimize_is_best_vertex(rng):
    s = Box([-1.0, 0.0, 2.0], [1.0, 3.0, 2.5])
    corners = np.array(list(itertools.product(*zip(s.lower, s.upper))))
    for _ in range(20):
        c = rng.normal(size=3)
        assert c @ s.linear_minimize(c) == pytest.approx((corners @ c).min(), abs=1e-12)


def test_diameters():
    assert diameter(Box.cube(3, 2)) == pytest.approx(6 * np.sqrt(2))
    assert diameter(L2Ball(3.0, 2)) == 6.0
    # opposite vertices are the farthest pair of the L1 ball
    verts = np.array([[3, 0], [-3, 0], [0, 3], [0, -3]], dtype=float)
    brute = max(np.linalg.norm(a - b) for a in verts for b in verts)
    assert diameter(L1Ball(3.0, 2)) == pytest.approx(brute)


def test_diameter_bounds_random_pairs(any_set, rng):
    Z = any_set.project(rng.normal(scale=5, size=(2000, any_set.dim)))
    dists = np.linalg.norm(Z[:1000] - Z[1000:], axis=1)
    assert dists.max() <= any_set.diameter() + 1e-12


def test_errors():
    with pytest.raises(UsageError):
        project(Box.cube(1, 2), [1.0, 2.0, 3.0])
    with pytest.raises(InputError):
        project(L1Ball(1.0, 2), [np.nan, 0.0])
    with pytest.raises(InputError):
        linear_minimize(L2Ball(1.0, 2), [np.inf, 0.0])
    with pytest.raises(UsageError):
        Box([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(UsageError):
        L1Ball(0.0, 2)


def test_from_config_roundtrip():
    for s in SETS:
        again = constraint_from_config(s.to_config())
        assert type(again) is type(s)
        assert again.diameter() == pytest.approx(s.diameter())
    assert isinstance(constraint_from_config({"kind": "box", "half_width": 3, "dim": 2}), Box)
    with pytest.raises(UsageError):
        constraint_from_config({"kind": "simplex"})


def test_feasible_grid_is_feasible():
    for s in SETS:
        G = feasible_grid(s, 512)
        assert G.shape == (512, s.dim)
        assert np.all(s.contains(G, tol=1e-12))
