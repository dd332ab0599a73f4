"""Convex decision sets inside the unit cube.

Every set supports an exact linear maximization oracle (``lmo``), Euclidean
projection, membership tests and the geometric constants used by the online
algorithms: the radius bound ``R``, the inf-norm minimizer and, for
downward-closed sets, the lower bound ``u``.

All array-valued methods accept batches: the last axis is the coordinate
axis, leading axes are broadcast.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

CONTAINS_TOL = 1e-9


class DecisionSet:
    """Interface shared by the supported set kinds."""

    kind = "abstract"
    d: int

    @property
    def radius(self):
        raise NotImplementedError

    @property
    def downward_closed(self):
        raise NotImplementedError

    @property
    def lower_bound(self):
        """The lower bound ``u`` of a downward-closed set (the origin here)."""
        if not self.downward_closed:
            raise ValueError(f"{self.kind} set is not downward-closed")
        return np.zeros(self.d)

    def inf_norm_minimizer(self):
        """Return ``(x, nu)`` with ``x = argmin_K ||x||_inf`` and ``nu = ||x||_inf``."""
        return np.zeros(self.d), 0.0

    def contains(self, x, tol=CONTAINS_TOL):
        raise NotImplementedError

    def lmo(self, c):
        raise NotImplementedError

    def project(self, y):
        raise NotImplementedError

    def random_points(self, rng, m):
        raise NotImplementedError

    def to_spec(self):
        raise NotImplementedError


def _in_cube(x, lower, upper, tol):
    return np.all((x >= lower - tol) & (x <= upper + tol), axis=-1)


@dataclass(frozen=True, eq=False)
class Box(DecisionSet):
    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower/upper must be 1-D arrays of equal length")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
            raise ValueError("box must satisfy 0 <= lower <= upper <= 1")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d):
        return cls(np.zeros(d), np.ones(d))

    @property
    def d(self):
        return self.lower.size

    @property
    def radius(self):
        return float(np.linalg.norm(self.upper))

    @property
    def downward_closed(self):
        return bool(np.all(self.lower == 0))

    def inf_norm_minimizer(self):
        return self.lower.copy(), float(self.lower.max(initial=0.0))

    def contains(self, x, tol=CONTAINS_TOL):
        return _in_cube(np.asarray(x, dtype=float), self.lower, self.upper, tol)

    def lmo(self, c):
        c = np.asarray(c, dtype=float)
        return np.where(c > 0, self.upper, self.lower)

    def project(self, y):
        return np.clip(np.asarray(y, dtype=float), self.lower, self.upper)

    def random_points(self, rng, m):
        return self.lower + (self.upper - self.lower) * rng.random((m, self.d))

    def to_spec(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class _BudgetSet(DecisionSet):
    """``{x in [0,1]^d : <a, x> <= b}`` with ``a > 0``."""

    def _weights(self):
        raise NotImplementedError

    @property
    def downward_closed(self):
        return True

    def contains(self, x, tol=CONTAINS_TOL):
        x = np.asarray(x, dtype=float)
        return _in_cube(x, 0.0, 1.0, tol) & (x @ self._weights() <= self.budget + tol)

    def lmo(self, c):
        # Greedy fill by value density c_j / a_j; exact for a single budget row.
        c = np.asarray(c, dtype=float)
        a = self._weights()
        order = np.argsort(-(c / a), axis=-1, kind="stable")
        c_sorted = np.take_along_axis(c, order, axis=-1)
        a_sorted = a[order]
        cap = (c_sorted > 0).astype(float)
        used_before = np.cumsum(a_sorted * cap, axis=-1) - a_sorted * cap
        x_sorted = np.clip((self.budget - used_before) / a_sorted, 0.0, cap)
        out = np.empty_like(x_sorted)
        np.put_along_axis(out, order, x_sorted, axis=-1)
        return out

    def project(self, y):
        y = np.asarray(y, dtype=float)
        a = self._weights()
        clipped = np.clip(y, 0.0, 1.0)
        excess = clipped @ a > self.budget
        if not np.any(excess):
            return clipped
        # x(lam) = clip(y - lam a, 0, 1) and the load s(lam) = <a, x(lam)> is
        # piecewise linear and nonincreasing, with kinks where a coordinate
        # leaves 1 or reaches 0.  Locate the segment containing s = b and
        # solve on it exactly.
        yb = y[excess]
        kinks = np.concatenate([np.zeros((len(yb), 1)), yb / a, (yb - 1.0) / a], axis=1)
        kinks = np.sort(np.maximum(kinks, 0.0), axis=1)
        load = np.clip(yb[:, None, :] - kinks[:, :, None] * a, 0.0, 1.0) @ a
        k = np.argmax(load <= self.budget, axis=1)
        rows = np.arange(len(yb))
        l0, l1 = kinks[rows, k - 1], kinks[rows, k]
        s0, s1 = load[rows, k - 1], load[rows, k]
        span = s0 - s1
        lam = np.where(span > 0, l0 + (s0 - self.budget) * (l1 - l0) / np.where(span > 0, span, 1.0), l1)
        out = clipped.copy()
        out[excess] = np.clip(yb - lam[:, None] * a, 0.0, 1.0)
        return out

    def random_points(self, rng, m):
        a = self._weights()
        u = rng.random((m, self.d))
        load = u @ a
        shrink = np.where(load > self.budget, self.budget / np.maximum(load, 1e-300), 1.0)
        x = u * (shrink * rng.random(m) ** (1.0 / self.d))[:, None]
        # Mix in random convex combinations of LMO vertices to reach the boundary.
        k = m // 4
        if k:
            dirs = rng.standard_normal((k, 3, self.d))
            verts = self.lmo(dirs)
            w = rng.dirichlet(np.ones(3), size=k)
            x[:k] = np.einsum("kv,kvd->kd", w, verts)
        return x

    def _vertex_radius(self):
        a = self._weights()
        d = a.size
        if d > 14:
            return float(np.sqrt(np.sum(np.minimum(1.0, self.budget / a) ** 2)))
        best = 0.0
        for mask in itertools.product((0, 1), repeat=d):
            s = np.array(mask, dtype=float)
            rest = self.budget - s @ a
            if rest < -1e-15:
                continue
            best = max(best, float(s @ s))
            for j in np.flatnonzero(s == 0):
                frac = min(1.0, rest / a[j])
                best = max(best, float(s @ s + frac**2))
        return float(np.sqrt(best))


@dataclass(frozen=True, eq=False)
class CappedSimplex(_BudgetSet):
    dim: int
    budget: float
    kind = "capped_simplex"

    def __post_init__(self):
        if self.dim < 1 or self.budget <= 0:
            raise ValueError("capped simplex needs d >= 1 and budget > 0")

    @property
    def d(self):
        return self.dim

    def _weights(self):
        return np.ones(self.dim)

    @property
    def radius(self):
        b = min(float(self.budget), float(self.dim))
        whole = int(np.floor(b))
        return float(np.sqrt(whole + (b - whole) ** 2))

    def to_spec(self):
        return {"kind": "capped_simplex", "d": self.dim, "budget": float(self.budget)}


@dataclass(frozen=True, eq=False)
class Knapsack(_BudgetSet):
    weights: np.ndarray
    budget: float
    kind = "knapsack"

    def __post_init__(self):
        a = np.array(self.weights, dtype=float)
        if a.ndim != 1 or np.any(a <= 0) or self.budget <= 0:
            raise ValueError("knapsack needs positive weights and budget")
        a.setflags(write=False)
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "_radius", self._vertex_radius())

    @property
    def d(self):
        return self.weights.size

    def _weights(self):
        return self.weights

    @property
    def radius(self):
        return self._radius

    def to_spec(self):
        return {"kind": "knapsack", "weights": self.weights.tolist(), "budget": float(self.budget)}


def make_set(spec, d=None):
    """Build a decision set from its run-config descriptor."""
    kind = spec["kind"]
    if kind == "box":
        lower = spec.get("lower")
        upper = spec.get("upper")
        dim = len(lower) if lower is not None else (len(upper) if upper is not None else d)
        if dim is None:
            raise ValueError("box needs a dimension")
        lower = np.zeros(dim) if lower is None else lower
        upper = np.ones(dim) if upper is None else upper
        s = Box(lower, upper)
    elif kind == "capped_simplex":
        s = CappedSimplex(int(spec.get("d", d)), float(spec["budget"]))
    elif kind == "knapsack":
        s = Knapsack(spec["weights"], float(spec["budget"]))
    else:
        raise ValueError(f"unknown set kind {kind!r}")
    if d is not None and s.d != d:
        raise ValueError(f"set dimension {s.d} does not match d={d}")
    return s
