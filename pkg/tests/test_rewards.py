import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dosm.evaluation import mc_mean_test
from dosm.rewards import (
    MONOTONE_SCALE,
    NONMONOTONE_SCALE,
    QuadraticDRSubmodular,
    Z_cdf,
    Z_inverse_cdf,
    Zprime_cdf,
    Zprime_inverse_cdf,
    boost_sample,
    boosted_grad_monotone,
    boosted_grad_nonmonotone,
    boosting_gap,
    check_dr_submodular,
    check_monotone,
    check_nonnegative,
    check_smooth,
    grad_F_numeric,
    make_sequence,
    sample_Z,
    sample_Zprime,
)
from dosm.verify import planted_counterexample, random_quadratic


def _mp_Z_cdf(c):
    return mpmath.quad(lambda u: (1 - u / 2) ** -3 / 3, [0, c])


def _mp_Zprime_cdf(c):
    return mpmath.quad(lambda u: mpmath.e ** (u - 1) / (1 - 1 / mpmath.e), [0, c])


# -- function family ---------------------------------------------------------


def test_monotone_example_d1(rng):
    f = QuadraticDRSubmodular([[-1.0]], [1.0])
    xs = np.linspace(0, 1, 11)[:, None]
    assert np.all(f.grad(xs) >= 0) and f.value(np.zeros(1)) == 0
    assert check_monotone(f, 1000, rng).ok and check_dr_submodular(f, 1000, rng).ok


def test_zero_function(rng):
    f = QuadraticDRSubmodular(np.zeros((3, 3)), np.zeros(3))
    for check in (check_dr_submodular, check_nonnegative, check_monotone):
        res = check(f, 200, rng)
        assert res.ok and res.worst == 0.0
    assert check_smooth(f, f.beta, 200, rng).ok


def test_linear_function_is_modular(rng):
    f = QuadraticDRSubmodular(np.zeros((3, 3)), [1.0, -2.0, 0.5])
    assert check_dr_submodular(f, 500, rng).worst == pytest.approx(0.0, abs=1e-15)


def test_planted_counterexample_rejected(rng):
    f = planted_counterexample()
    res = check_dr_submodular(f, 2000, rng)
    assert not res.ok and res.witness is not None
    w = res.witness
    e = np.zeros(f.d)
    e[w["j"]] = w["z"]
    gap = (f.value(w["y"] + e) - f.value(w["y"])) - (f.value(w["x"] + e) - f.value(w["x"]))
    assert gap == pytest.approx(res.worst) and gap > 1e-9
    assert np.all(w["x"] <= w["y"])


def test_sequence_determinism():
    a = make_sequence(7, 20, 3, 4, noise=0.2)
    b = make_sequence(7, 20, 3, 4, noise=0.2)
    for name in ("H", "h", "c0"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert make_sequence(8, 20, 3, 4).h.tobytes() != a.h.tobytes()


@pytest.mark.parametrize("monotone", [False, True])
def test_sequence_satisfies_assumptions(monotone, rng):
    seq = make_sequence(3, 12, 2, 3, monotone=monotone, noise=0.1)
    assert np.all(seq.H <= 0)
    for t in range(seq.T):
        for i in range(seq.n):
            f = seq.local(t, i)
            assert check_dr_submodular(f, 100, rng).ok
            assert check_nonnegative(f, 100, rng).ok
            assert check_smooth(f, seq.beta, 100, rng).ok
            if monotone:
                assert check_monotone(f, 100, rng).ok
            assert f.grad_bound + seq.sigma_noise <= seq.G + 1e-12


def test_nonmonotone_offset_rule():
    seq = make_sequence(1, 5, 2, 3)
    expected = np.abs(seq.h).sum(-1) + np.abs(seq.H).sum((-2, -1))
    np.testing.assert_array_equal(seq.c0, expected)


# -- gradients ---------------------------------------------------------------


def test_grad_examples(rng):
    f = random_quadratic(rng, 3, noise=0.0)
    np.testing.assert_array_equal(f.grad(np.zeros(3)), f.h)
    x = rng.random(3)
    np.testing.assert_array_equal(f.stoch_grad(x, rng), f.grad(x))
    with pytest.raises(ValueError):
        f.grad(np.array([1.5, 0.0, 0.0]))


def test_stoch_grad_unbiased():
    rng = np.random.default_rng(5)
    f = random_quadratic(rng, 3, noise=0.5)
    x = rng.random(3)
    samples = np.array([f.stoch_grad(x, rng) for _ in range(100_000)])
    assert mc_mean_test(samples, f.grad(x), 4.0)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(0, 2))
def test_stoch_grad_norm_bound(d, seed, noise):
    rng = np.random.default_rng(seed)
    f = random_quadratic(rng, d, noise=noise)
    X = rng.random((200, d))
    G = np.linalg.norm(f.stoch_grad(X, rng), axis=-1)
    assert G.max() <= f.G + 1e-12


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_grad_bound_is_attained_at_a_corner(d, seed):
    rng = np.random.default_rng(seed)
    f = random_quadratic(rng, d)
    corners = np.array(list(np.ndindex(*(2,) * d)), dtype=float)
    coord_max = np.abs(f.grad(corners)).max(axis=0)
    assert f.grad_bound == pytest.approx(float(np.linalg.norm(coord_max)), rel=1e-12)


# -- samplers ----------------------------------------------------------------


def test_Z_inverse_examples():
    assert Z_inverse_cdf(0.0) == 0.0
    assert Z_inverse_cdf(1.0) == pytest.approx(1.0, abs=1e-15)
    assert Z_inverse_cdf(1 / 3) == pytest.approx(2 - math.sqrt(2), abs=1e-15)
    mpmath.mp.dps = 30
    assert float(_mp_Z_cdf(2 - mpmath.sqrt(2))) == pytest.approx(1 / 3, abs=1e-15)


def test_Zprime_inverse_examples():
    assert Zprime_inverse_cdf(0.0) == pytest.approx(0.0, abs=1e-15)
    assert Zprime_inverse_cdf(1.0) == pytest.approx(1.0, abs=1e-15)
    assert Zprime_inverse_cdf(0.5) == pytest.approx(0.620115, abs=1e-6)
    mpmath.mp.dps = 30
    assert float(_mp_Zprime_cdf(Zprime_inverse_cdf(0.5))) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("c", [0.0, 0.1, 0.37, 0.5, 0.9, 1.0])
def test_closed_form_cdfs_match_quadrature(c):
    mpmath.mp.dps = 30
    assert Z_cdf(c) == pytest.approx(float(_mp_Z_cdf(c)), abs=1e-14)
    assert Zprime_cdf(c) == pytest.approx(float(_mp_Zprime_cdf(c)), abs=1e-14)


@given(st.floats(0, 1))
def test_inverse_cdf_round_trip(p):
    assert Z_cdf(Z_inverse_cdf(p)) == pytest.approx(p, abs=1e-13)
    assert Zprime_cdf(Zprime_inverse_cdf(p)) == pytest.approx(p, abs=1e-13)


def test_sampler_ranges(rng):
    for s in (sample_Z(rng, 10_000), sample_Zprime(rng, 10_000)):
        assert s.min() >= 0 and s.max() <= 1


# -- surrogate gradients -----------------------------------------------------


def test_grad_F_linear_closed_forms(rng):
    h = rng.random(4)
    f = QuadraticDRSubmodular(np.zeros((4, 4)), h)
    x = rng.random(4)
    mpmath.mp.dps = 30
    w_non = float(mpmath.quad(lambda z: 1 / (8 * (1 - z / 2) ** 3), [0, 1]))
    assert w_non == pytest.approx(3 / 8, abs=1e-15)
    np.testing.assert_allclose(grad_F_numeric(f, x, "nonmonotone"), 0.375 * h, rtol=1e-12)
    np.testing.assert_allclose(grad_F_numeric(f, x, "monotone"), (1 - 1 / math.e) * h, rtol=1e-12)
    const = QuadraticDRSubmodular(np.zeros((4, 4)), np.zeros(4), c0=3.0)
    np.testing.assert_array_equal(grad_F_numeric(const, x, "monotone"), 0)


def test_grad_F_quadratic_against_mpmath(rng):
    f = random_quadratic(rng, 3)
    x, xl = rng.random(3) * 0.8, rng.random(3) * 0.2
    mpmath.mp.dps = 25
    for mode in ("nonmonotone", "monotone"):
        got = grad_F_numeric(f, x, mode, xl)
        for j in range(3):
            if mode == "monotone":
                integrand = lambda z: mpmath.e ** (z - 1) * float(f.grad(float(z) * x)[j])  # noqa: E731
            else:
                integrand = lambda z: float(f.grad(float(z) / 2 * (x - xl) + xl)[j]) / (8 * (1 - z / 2) ** 3)  # noqa: E731
            assert got[j] == pytest.approx(float(mpmath.quad(integrand, [0, 1])), abs=1e-10)


def test_boost_query_examples(rng):
    f = random_quadratic(rng, 3, noise=0.0)
    xl = np.array([0.1, 0.2, 0.0])
    for z in (0.0, 0.4, 1.0):
        np.testing.assert_allclose(boosted_grad_nonmonotone(f, xl, xl, z, rng), NONMONOTONE_SCALE * f.grad(xl))
    x = rng.random(3)
    np.testing.assert_allclose(boosted_grad_nonmonotone(f, x, xl, 0.0, rng), NONMONOTONE_SCALE * f.grad(xl))
    np.testing.assert_allclose(boosted_grad_monotone(f, x, 0.0, rng), MONOTONE_SCALE * f.h)
    np.testing.assert_allclose(boosted_grad_monotone(f, x, 1.0, rng), MONOTONE_SCALE * f.grad(x))
    s = boost_sample("monotone", x, None, rng)
    np.testing.assert_allclose(s.query_point, s.z * x)
    assert s.scale == MONOTONE_SCALE


@pytest.mark.parametrize("mode", ["nonmonotone", "monotone"])
def test_boosted_estimators_unbiased(mode):
    rng = np.random.default_rng(11 if mode == "monotone" else 12)
    f = random_quadratic(rng, 3, noise=0.3)
    x = rng.random(3) * 0.5
    xl = np.zeros(3)
    N = 50_000
    if mode == "monotone":
        samples = boosted_grad_monotone(f, x, sample_Zprime(rng, N), rng)
    else:
        samples = boosted_grad_nonmonotone(f, x, xl, sample_Z(rng, N), rng)
    assert mc_mean_test(samples, grad_F_numeric(f, x, mode, xl), 4.0)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_surrogate_gradient_norm_bounds(d, seed):
    rng = np.random.default_rng(seed)
    f = random_quadratic(rng, d)
    for x in rng.random((5, d)):
        assert np.linalg.norm(grad_F_numeric(f, x, "nonmonotone")) <= 3 * f.G / 8 + 1e-12
        assert np.linalg.norm(grad_F_numeric(f, x, "monotone")) <= (1 - 1 / math.e) * f.G + 1e-12


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_boosting_inequality(d, seed):
    rng = np.random.default_rng(seed)
    f = random_quadratic(rng, d)
    fm = random_quadratic(rng, d, monotone=True)
    xl = rng.random(d) * 0.3
    for _ in range(5):
        x = xl + (1 - xl) * rng.random(d)
        y = xl + (1 - xl) * rng.random(d)
        assert boosting_gap(f, x, y, "nonmonotone", xl) >= -1e-6
        assert boosting_gap(fm, rng.random(d), rng.random(d), "monotone") >= -1e-6
