"""DR-submodular reward sequences, gradient oracles and boosting estimators.

Rewards are quadratics ``f(x) = 0.5 x'Hx + h'x + c0`` whose Hessian has only
nonpositive entries, which certifies continuous DR-submodularity on the unit
cube.  A :class:`RewardSequence` stacks one such function per (round, node)
and is generated entirely from a seed before any learner runs.

The boosting machinery replaces a reward ``f`` by a surrogate whose
gradient is a weighted average of ``grad f`` along a segment:

* non-monotone: ``grad F(x) = int_0^1 (1/8)(1 - z/2)^-3 grad f(z/2 (x - xl) + xl) dz``
* monotone:     ``grad F(x) = int_0^1 exp(z - 1) grad f(z x) dz``

Both integrals are estimated without bias from a single stochastic gradient
by drawing ``z`` from the matching density (see :func:`sample_Z`,
:func:`sample_Zprime`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CUBE_TOL = 1e-9
NONMONOTONE_SCALE = 3.0 / 8.0
MONOTONE_SCALE = 1.0 - 1.0 / math.e
QUAD_NODES = 200


def _check_cube(x, tol=CUBE_TOL):
    x = np.asarray(x, dtype=float)
    if x.size and (x.min() < -tol or x.max() > 1.0 + tol):
        raise ValueError("query point lies outside the unit cube")
    return x


@dataclass(frozen=True, eq=False)
class QuadraticDRSubmodular:
    """``f(x) = 0.5 x'Hx + h'x + c0`` on ``[0, 1]^d``.

    ``sigma_noise`` is the radius bound of the stochastic-gradient noise.
    """

    H: np.ndarray
    h: np.ndarray
    c0: float = 0.0
    sigma_noise: float = 0.0

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        h = np.array(self.h, dtype=float)
        if H.shape != (h.size, h.size):
            raise ValueError(f"H shape {H.shape} does not match h of length {h.size}")
        if not np.allclose(H, H.T):
            raise ValueError("H must be symmetric")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def d(self):
        return self.h.size

    @property
    def beta(self):
        """Smoothness constant (spectral norm of ``H``)."""
        return float(np.linalg.norm(self.H, 2)) if self.d else 0.0

    @property
    def grad_bound(self):
        """Exact coordinatewise sup of ``|grad f|`` over the cube, as a Euclidean norm.

        ``(Hx + h)_j`` is affine with nonpositive slopes, so it ranges over
        ``[h_j + sum_k H_jk, h_j]`` on the cube.
        """
        lo = self.h + np.minimum(self.H, 0).sum(axis=1)
        hi = self.h + np.maximum(self.H, 0).sum(axis=1)
        return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))

    @property
    def G(self):
        return self.grad_bound + self.sigma_noise

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.H, x) + x @ self.h + self.c0

    __call__ = value

    def grad(self, x):
        x = _check_cube(x)
        return x @ self.H + self.h

    def stoch_grad(self, x, rng):
        g = self.grad(x)
        if self.sigma_noise == 0:
            return g
        return g + sphere_noise(rng, self.sigma_noise, g.shape)


def sphere_noise(rng, sigma, shape):
    """Mean-zero noise: uniform direction times radius ``sigma * U[0, 1]``."""
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    direction = rng.standard_normal(shape)
    norms = np.linalg.norm(direction, axis=-1, keepdims=True)
    direction = direction / np.where(norms == 0, 1.0, norms)
    radius = sigma * rng.random(shape[:-1] + (1,))
    return direction * radius


# ---------------------------------------------------------------------------
# sequences


@dataclass(frozen=True, eq=False)
class RewardSequence:
    """Oblivious ``T x n`` grid of quadratic DR-submodular rewards.

    Attributes
    ----------
    H : ndarray, shape (T, n, d, d)
    h : ndarray, shape (T, n, d)
    c0 : ndarray, shape (T, n)
    sigma_noise : float
    monotone : bool
    seed : int or None
    """

    H: np.ndarray
    h: np.ndarray
    c0: np.ndarray
    sigma_noise: float = 0.0
    monotone: bool = False
    seed: int | None = None

    def __post_init__(self):
        for name in ("H", "h", "c0"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # Global (summed over nodes) coefficients for fast reward evaluation.
        for name, arr in (("H_sum", self.H.sum(axis=1)), ("h_sum", self.h.sum(axis=1)), ("c_sum", self.c0.sum(axis=1))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def T(self):
        return self.h.shape[0]

    @property
    def n(self):
        return self.h.shape[1]

    @property
    def d(self):
        return self.h.shape[2]

    def local(self, t, i):
        return QuadraticDRSubmodular(self.H[t, i], self.h[t, i], self.c0[t, i], self.sigma_noise)

    @property
    def beta(self):
        if self.T == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.H, ord=2, axis=(-2, -1))))

    @property
    def grad_bound(self):
        lo = self.h + np.minimum(self.H, 0).sum(axis=-1)
        hi = self.h + np.maximum(self.H, 0).sum(axis=-1)
        per = np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)), axis=-1)
        return float(per.max(initial=0.0))

    @property
    def G(self):
        """Almost-sure bound on every stochastic gradient norm."""
        return self.grad_bound + self.sigma_noise

    def grads(self, t, X):
        """Exact local gradients: row ``i`` is ``grad f_t^i(X[i])``."""
        X = _check_cube(X)
        return np.einsum("ijk,ik->ij", self.H[t], X) + self.h[t]

    def global_values(self, t, X):
        """``f_t(x) = sum_j f_t^j(x)`` evaluated at every row of ``X``."""
        X = np.asarray(X, dtype=float)
        return 0.5 * np.einsum("mi,ij,mj->m", X, self.H_sum[t], X) + X @ self.h_sum[t] + self.c_sum[t]

    def total(self):
        """Coefficients ``(H, h, c)`` of ``sum_t f_t`` (a single quadratic)."""
        return self.H_sum.sum(axis=0), self.h_sum.sum(axis=0), float(self.c_sum.sum())

    def prefix_values(self, x):
        """``[f_1(x), ..., f_T(x)]`` for one fixed point ``x``."""
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("i,tij,j->t", x, self.H_sum, x) + self.h_sum @ x + self.c_sum


def _random_hessians(rng, shape, d, density, scale):
    mags = scale * rng.random(shape + (d, d))
    mask = rng.random(shape + (d, d)) < density
    upper = np.triu(mags * mask)
    H = -(upper + np.swapaxes(np.triu(upper, 1), -1, -2))
    return H


def make_sequence(seed, T, n, d, monotone=False, density=1.0, noise=0.0, h_scale=1.0, H_scale=1.0):
    """Generate a seeded oblivious reward sequence.

    Non-monotone instances get ``h ~ U[0, h_scale]`` and the offset
    ``c0 = ||h||_1 + sum |H_ij|``, which keeps ``f >= 0`` on the cube.
    Monotone instances shift ``h_j >= -(H 1)_j`` so the gradient is
    nonnegative on the cube and ``c0 = 0``.
    """
    rng = np.random.default_rng(seed)
    H = _random_hessians(rng, (T, n), d, density, H_scale)
    if monotone:
        h = -H.sum(axis=-1) + h_scale * rng.random((T, n, d))
        c0 = np.zeros((T, n))
    else:
        h = h_scale * rng.random((T, n, d))
        c0 = np.abs(h).sum(axis=-1) + np.abs(H).sum(axis=(-2, -1))
    return RewardSequence(H, h, c0, sigma_noise=float(noise), monotone=monotone, seed=seed)


def linear_losses(seed, T, n, d, G=1.0):
    """Oblivious linear losses ``c_t^i`` with ``||c|| <= G``.

    Each node has a fixed random drift direction plus fresh per-round
    fluctuations, rescaled to respect the norm bound.
    """
    rng = np.random.default_rng(seed)
    drift = rng.standard_normal((1, n, d))
    c = drift + rng.standard_normal((T, n, d))
    norms = np.linalg.norm(c, axis=-1, keepdims=True)
    c = c / np.maximum(norms, 1e-300) * (G * rng.random((T, n, 1)))
    return c


# ---------------------------------------------------------------------------
# the two boosting distributions


def Z_cdf(c):
    c = np.asarray(c, dtype=float)
    return ((1.0 - c / 2.0) ** -2 - 1.0) / 3.0


def Z_inverse_cdf(p):
    p = np.asarray(p, dtype=float)
    return 2.0 * (1.0 - (3.0 * p + 1.0) ** -0.5)


def Z_density(u):
    return (1.0 - np.asarray(u, dtype=float) / 2.0) ** -3 / 3.0


def Zprime_cdf(c):
    c = np.asarray(c, dtype=float)
    return (np.exp(c - 1.0) - math.exp(-1.0)) / (1.0 - math.exp(-1.0))


def Zprime_inverse_cdf(p):
    p = np.asarray(p, dtype=float)
    return 1.0 + np.log(p * (1.0 - math.exp(-1.0)) + math.exp(-1.0))


def Zprime_density(u):
    return np.exp(np.asarray(u, dtype=float) - 1.0) / (1.0 - math.exp(-1.0))


def sample_Z(rng, size=None):
    return Z_inverse_cdf(rng.random(size))


def sample_Zprime(rng, size=None):
    return Zprime_inverse_cdf(rng.random(size))


@dataclass(frozen=True)
class BoostSample:
    z: float
    query_point: np.ndarray
    scale: float


def boost_query_nonmonotone(x_hat, x_inf, z):
    x_hat = np.asarray(x_hat, dtype=float)
    x_inf = np.asarray(x_inf, dtype=float)
    z = np.asarray(z, dtype=float)[..., None]
    return (z / 2.0) * (x_hat - x_inf) + x_inf


def boost_query_monotone(x_hat, z):
    return np.asarray(z, dtype=float)[..., None] * np.asarray(x_hat, dtype=float)


def boosted_grad_nonmonotone(f, x_hat, x_inf, z, rng):
    """``(3/8) * stoch_grad f`` at ``(z/2)(x_hat - x_inf) + x_inf``."""
    q = boost_query_nonmonotone(x_hat, x_inf, z)
    return NONMONOTONE_SCALE * f.stoch_grad(q, rng)


def boosted_grad_monotone(f, x_hat, z, rng):
    """``(1 - 1/e) * stoch_grad f`` at ``z * x_hat``."""
    q = boost_query_monotone(x_hat, z)
    return MONOTONE_SCALE * f.stoch_grad(q, rng)


def boost_sample(mode, x_hat, x_inf, rng):
    if mode == "monotone":
        z = float(sample_Zprime(rng))
        return BoostSample(z, boost_query_monotone(x_hat, z), MONOTONE_SCALE)
    z = float(sample_Z(rng))
    return BoostSample(z, boost_query_nonmonotone(x_hat, x_inf, z), NONMONOTONE_SCALE)


def _gauss_legendre_unit(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def grad_F_numeric(f, x, mode, x_inf=None, order=QUAD_NODES):
    """Surrogate gradient by Gauss-Legendre quadrature (test oracle).

    ``f`` needs a vectorized ``grad`` accepting ``(m, d)`` inputs.
    """
    x = np.asarray(x, dtype=float)
    z, w = _gauss_legendre_unit(order)
    if mode == "monotone":
        pts = z[:, None] * x
        weight = np.exp(z - 1.0)
    else:
        xl = np.zeros_like(x) if x_inf is None else np.asarray(x_inf, dtype=float)
        pts = (z[:, None] / 2.0) * (x - xl) + xl
        weight = 1.0 / (8.0 * (1.0 - z / 2.0) ** 3)
    return (w * weight) @ f.grad(pts)


# ---------------------------------------------------------------------------
# assumption checkers


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    worst: float
    witness: dict | None = None

    def __bool__(self):
        return self.ok


def _ordered_pair(rng, d):
    a, b = rng.random(d), rng.random(d)
    return np.minimum(a, b), np.maximum(a, b)


def check_dr_submodular(f, trials, rng, tol=1e-9):
    """Sample the diminishing-returns inequality along coordinate directions.

    For random ``x <= y`` in the cube, coordinate ``j`` and step ``z`` keeping
    both shifted points in the cube, require
    ``f(x + z e_j) - f(x) >= f(y + z e_j) - f(y) - tol``.
    """
    d = f.d
    worst = 0.0
    witness = None
    for _ in range(trials):
        x, y = _ordered_pair(rng, d)
        j = int(rng.integers(d))
        zmax = 1.0 - y[j]
        z = zmax * rng.random()
        e = np.zeros(d)
        e[j] = z
        gap = (f.value(y + e) - f.value(y)) - (f.value(x + e) - f.value(x))
        if gap > worst:
            worst = float(gap)
            witness = {"x": x, "y": y, "j": j, "z": z}
    return CheckResult(worst <= tol, worst, witness if worst > tol else None)


def _cube_corners(d):
    if d > 12:
        return np.empty((0, d))
    return np.array(list(np.ndindex(*(2,) * d)), dtype=float)


def check_nonnegative(f, trials, rng, tol=1e-9):
    pts = np.vstack([rng.random((trials, f.d)), _cube_corners(f.d)])
    vals = f.value(pts)
    k = int(np.argmin(vals))
    worst = float(max(0.0, -vals[k]))
    return CheckResult(worst <= tol, worst, {"x": pts[k]} if worst > tol else None)


def check_monotone(f, trials, rng, tol=1e-9):
    """Sampled ``f(x) <= f(y)`` for ``x <= y`` plus ``f(0) = 0``."""
    worst = abs(float(f.value(np.zeros(f.d))))
    witness = {"x": np.zeros(f.d)} if worst > tol else None
    for _ in range(trials):
        x, y = _ordered_pair(rng, f.d)
        gap = float(f.value(x) - f.value(y))
        if gap > worst:
            worst, witness = gap, {"x": x, "y": y}
    return CheckResult(worst <= tol, worst, witness if worst > tol else None)


def check_smooth(f, beta, trials, rng, tol=1e-9):
    worst = 0.0
    witness = None
    for _ in range(trials):
        x, y = rng.random(f.d), rng.random(f.d)
        gap = float(np.linalg.norm(f.grad(x) - f.grad(y)) - beta * np.linalg.norm(x - y))
        if gap > worst:
            worst, witness = gap, {"x": x, "y": y}
    return CheckResult(worst <= tol, worst, witness if worst > tol else None)


def boosting_gap(f, x, y, mode, x_inf=None):
    """Slack of the surrogate inequality at ``(x, y)`` (nonnegative when it holds).

    non-monotone: ``<grad F(x), y - x> - [(1 - nu)/4 f(y) - f((x + xl)/2)]``
    monotone:     ``<grad F(x), y - x> - [(1 - 1/e) f(y) - f(x)]``
    """
    gF = grad_F_numeric(f, x, mode, x_inf)
    lhs = float(gF @ (np.asarray(y) - np.asarray(x)))
    if mode == "monotone":
        rhs = MONOTONE_SCALE * f.value(y) - f.value(x)
    else:
        xl = np.zeros_like(x) if x_inf is None else np.asarray(x_inf, dtype=float)
        nu = float(np.max(xl, initial=0.0))
        rhs = (1.0 - nu) / 4.0 * f.value(y) - f.value((np.asarray(x) + xl) / 2.0)
    return lhs - float(rhs)
