import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from dosm.sets import Box, CappedSimplex, Knapsack, make_set


def _linprog_max(dset, c):
    """Independent LP oracle for max <c, x> over a budget set."""
    a = dset._weights()
    res = linprog(-np.asarray(c), A_ub=a[None, :], b_ub=[dset.budget], bounds=[(0, 1)] * dset.d, method="highs")
    return -res.fun


def _bisect_projection(dset, y, tol=1e-13):
    """Reference projection: clamp plus bisection on the budget multiplier."""
    a = dset._weights()
    x = np.clip(y, 0, 1)
    if x @ a <= dset.budget:
        return x
    lo, hi = 0.0, float(np.max(y / a)) + 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.clip(y - mid * a, 0, 1) @ a > dset.budget:
            lo = mid
        else:
            hi = mid
    return np.clip(y - hi * a, 0, 1)


def _sets(d):
    rng = np.random.default_rng(d)
    lo = rng.random(d) * 0.3
    return [
        Box.unit(d),
        Box(lo, lo + 0.5),
        CappedSimplex(d, 1.0),
        CappedSimplex(d, 1.5),
        Knapsack(rng.uniform(0.3, 2.0, d), 1.2),
    ]


# -- examples ----------------------------------------------------------------


def test_contains_examples():
    assert Box.unit(2).contains([0.5, 0.5])
    assert not CappedSimplex(3, 1.0).contains([0.6, 0.6, 0])
    assert Knapsack([2, 1], 1.0).contains([0.5, 0])


def test_lmo_examples():
    np.testing.assert_array_equal(CappedSimplex(3, 1.0).lmo([3, 1, 2]), [1, 0, 0])
    np.testing.assert_allclose(CappedSimplex(3, 1.5).lmo([3, 1, 2]), [1, 0, 0.5])
    for s in _sets(3):
        x = s.lmo(np.zeros(3))
        assert s.contains(x)
        np.testing.assert_array_equal(x, s.inf_norm_minimizer()[0])


def test_lmo_example_against_grid():
    s = CappedSimplex(3, 1.5)
    c = np.array([3.0, 1.0, 2.0])
    g = np.linspace(0, 1, 101)
    pts = np.array(list(itertools.product(g, g, g)))
    pts = pts[s.contains(pts)]
    assert c @ s.lmo(c) >= (pts @ c).max() - 1e-12
    assert c @ s.lmo(c) == pytest.approx(4.0)


def test_projection_examples():
    np.testing.assert_array_equal(Box.unit(2).project([2, -1]), [1, 0])
    np.testing.assert_allclose(CappedSimplex(2, 1.0).project([1, 1]), [0.5, 0.5], atol=1e-15)
    y = np.array([0.2, 0.3, 0.1])
    np.testing.assert_array_equal(CappedSimplex(3, 1.0).project(y), y)


def test_projection_example_against_grid():
    s = CappedSimplex(2, 1.0)
    g = np.linspace(0, 1, 2001)
    pts = np.array(list(itertools.product(g, g)))
    pts = pts[s.contains(pts)]
    best = pts[np.argmin(np.linalg.norm(pts - [1, 1], axis=1))]
    np.testing.assert_allclose(s.project([1, 1]), best, atol=1e-3)


def test_inf_norm_minimizer_examples():
    x, nu = CappedSimplex(3, 1.0).inf_norm_minimizer()
    np.testing.assert_array_equal(x, 0)
    assert nu == 0 and (1 - nu) / 4 == 0.25
    x, nu = Box([0.2, 0.1], [1, 1]).inf_norm_minimizer()
    np.testing.assert_array_equal(x, [0.2, 0.1])
    assert nu == 0.2
    assert Box.unit(4).inf_norm_minimizer()[1] == 0


def test_downward_closed_flags():
    assert CappedSimplex(2, 1).downward_closed and Knapsack([1, 2], 1).downward_closed
    assert Box.unit(2).downward_closed
    assert not Box([0.1, 0], [1, 1]).downward_closed
    with pytest.raises(ValueError):
        Box([0.1, 0], [1, 1]).lower_bound


def test_radius_closed_forms():
    assert CappedSimplex(3, 1.5).radius == pytest.approx(np.sqrt(1.25))
    assert CappedSimplex(2, 5.0).radius == pytest.approx(np.sqrt(2))
    assert Box.unit(4).radius == 2.0


def test_make_set_and_spec_round_trip():
    for s in _sets(3):
        t = make_set(s.to_spec(), 3)
        assert type(t) is type(s) and t.to_spec() == s.to_spec()
    with pytest.raises(ValueError):
        make_set({"kind": "capped_simplex", "d": 2, "budget": 1}, 3)
    with pytest.raises(ValueError):
        make_set({"kind": "polytope"})


# -- randomized properties ---------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_lmo_optimality(d):
    rng = np.random.default_rng(100 + d)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    for s in _sets(d):
        C = rng.standard_normal((1000, d))
        V = s.lmo(C)
        assert np.all(s.contains(V))
        best = np.einsum("kd,kd->k", C, V)
        X = s.random_points(rng, 10_000)
        assert np.all(s.contains(X))
        assert np.all(best[:, None] >= C @ X.T - 1e-9)
        feasible_corners = corners[s.contains(corners)]
        if len(feasible_corners):
            assert np.all(best[:, None] >= C @ feasible_corners.T - 1e-9)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_lmo_matches_linprog(d):
    rng = np.random.default_rng(d)
    for s in _sets(d)[2:]:
        for c in rng.standard_normal((50, d)):
            assert c @ s.lmo(c) == pytest.approx(_linprog_max(s, c), abs=1e-9)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_downward_closed(d, seed):
    rng = np.random.default_rng(seed)
    for s in _sets(d):
        if not s.downward_closed:
            continue
        Y = s.random_points(rng, 50)
        X = Y * rng.random(Y.shape)
        assert np.all(s.contains(X))


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_projection_properties(d, seed):
    rng = np.random.default_rng(seed)
    for s in _sets(d):
        Y1 = rng.normal(0.5, 1.5, (40, d))
        Y2 = rng.normal(0.5, 1.5, (40, d))
        P1, P2 = s.project(Y1), s.project(Y2)
        assert np.all(s.contains(P1))
        np.testing.assert_allclose(s.project(P1), P1, atol=1e-12)
        lhs = np.linalg.norm(P1 - P2, axis=1)
        assert np.all(lhs <= np.linalg.norm(Y1 - Y2, axis=1) + 1e-8)
        if hasattr(s, "budget"):
            for y, p in zip(Y1, P1):
                np.testing.assert_allclose(p, _bisect_projection(s, y), atol=1e-8)


@pytest.mark.parametrize("d", [2, 4, 8])
def test_radius_bound(d):
    rng = np.random.default_rng(d)
    for s in _sets(d):
        X = s.random_points(rng, 100_000)
        assert np.linalg.norm(X, axis=1).max() <= s.radius + 1e-12
        V = s.lmo(rng.standard_normal((2000, d)))
        assert np.linalg.norm(V, axis=1).max() <= s.radius + 1e-12


def test_projection_is_variational_minimizer(rng):
    # <y - P(y), x - P(y)> <= 0 for every feasible x.
    for s in _sets(4):
        X = s.random_points(rng, 500)
        for y in rng.normal(0.5, 1.0, (20, 4)):
            p = s.project(y)
            assert np.max((X - p) @ (y - p)) <= 1e-9
