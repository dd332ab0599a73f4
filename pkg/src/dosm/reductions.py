"""Reductions from online DR-submodular maximization to online linear optimization.

A *learner* here is anything with ``play(t) -> (n, d)`` and
``feed(t, oracle)``; the oracle maps ``(t, X)`` to the stochastic local
gradients ``grad f_t^i(X[i])``.

* :class:`BoostingReduction` feeds an inner engine the linear losses
  ``<-grad F_t^i, x>`` built from one boosted gradient per node and round.
  The non-monotone mode plays ``(x_hat + x_inf) / 2`` and targets
  ``alpha = (1 - nu) / 4``; the monotone mode plays ``x_hat`` and targets
  ``alpha = 1 - 1/e``.
* :class:`MetaFrankWolfe` runs ``L`` inner engines, builds each block's
  decision by ``L`` Frank-Wolfe steps and spends one round of the block on
  each inner engine (``alpha = 1/e``).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, HorizonExhausted
from .rewards import (
    MONOTONE_SCALE,
    NONMONOTONE_SCALE,
    sample_Z,
    sample_Zprime,
)

MODES = ("nonmonotone", "monotone")


class GradientOracle:
    """Stochastic local gradients with noise pre-drawn from per-node streams."""

    def __init__(self, seq, rngs=None):
        self.seq = seq
        self.noise = None
        if seq.sigma_noise > 0:
            if rngs is None or len(rngs) != seq.n:
                raise ValueError("noisy oracle needs one rng per node")
            cols = []
            for rng in rngs:
                direction = rng.standard_normal((seq.T, seq.d))
                norms = np.linalg.norm(direction, axis=-1, keepdims=True)
                direction /= np.where(norms == 0, 1.0, norms)
                cols.append(direction * (seq.sigma_noise * rng.random((seq.T, 1))))
            self.noise = np.stack(cols, axis=1)

    def __call__(self, t, X):
        g = self.seq.grads(t, X)
        if self.noise is not None:
            g = g + self.noise[t]
        return g


class LinearFeed:
    """Raw online linear optimization: feeds loss vectors ``c_t^i`` directly."""

    alpha = 1.0

    def __init__(self, engine, losses):
        self.engine = engine
        self.name = engine.name
        self.losses = np.asarray(losses, dtype=float)

    def play(self, t):
        return self.engine.decisions()

    def feed(self, t, oracle=None):
        self.engine.update(self.losses[t])


class BoostingReduction:
    """Boosted-gradient reduction around a single inner engine."""

    def __init__(self, engine, dset, mode, rngs, record=False):
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        self.engine = engine
        self.dset = dset
        self.mode = mode
        self.n, self.d, self.T = engine.n, engine.d, engine.T
        if mode == "monotone":
            self.x_inf = np.zeros(self.d)
            self.nu = 0.0
            self.alpha = 1.0 - 1.0 / math.e
            self.scale = MONOTONE_SCALE
            sampler = sample_Zprime
        else:
            self.x_inf, self.nu = dset.inf_norm_minimizer()
            self.alpha = (1.0 - self.nu) / 4.0
            self.scale = NONMONOTONE_SCALE
            sampler = sample_Z
        if len(rngs) != self.n:
            raise ValueError("need one rng per node")
        self.z = np.stack([sampler(rng, self.T) for rng in rngs], axis=1)
        self.name = f"boost-{mode}+{engine.name}"
        self.record = record
        self.x_hat = []
        self.fed = []
        self.fed_norm_max = 0.0
        self._xhat = None

    def play(self, t):
        self._xhat = self.engine.decisions().copy()
        if self.mode == "monotone":
            return self._xhat
        return 0.5 * (self._xhat + self.x_inf)

    def query_points(self, t):
        z = self.z[t][:, None]
        if self.mode == "monotone":
            return z * self._xhat
        return 0.5 * z * (self._xhat - self.x_inf) + self.x_inf

    def feed(self, t, oracle):
        if t >= self.T:
            raise HorizonExhausted(f"reduction horizon {self.T} exhausted")
        Q = np.clip(self.query_points(t), 0.0, 1.0)
        gF = self.scale * oracle(t, Q)
        self.fed_norm_max = max(self.fed_norm_max, float(np.linalg.norm(gF, axis=1).max()))
        if self.record:
            self.x_hat.append(self._xhat)
            self.fed.append(gF)
        self.engine.update(-gF)


def fw_chain(V):
    """Frank-Wolfe chain ``x_1 = 0, x_{k+1} = x_k + v_k * (1 - x_k) / L``.

    ``V`` has shape ``(L, ..., d)``; the result has shape ``(L + 1, ..., d)``.
    """
    V = np.asarray(V, dtype=float)
    L = V.shape[0]
    out = np.zeros((L + 1,) + V.shape[1:])
    for k in range(L):
        out[k + 1] = out[k] + V[k] * (1.0 - out[k]) / L
    return out


class MetaFrankWolfe:
    """Blocked meta Frank-Wolfe over ``L`` inner engines.

    One random permutation of each block's rounds, shared by all nodes,
    assigns round ``t_{q,k}`` to engine ``k``.  In that round every node
    queries its gradient at chain point ``x_{q,k}`` and feeds engine ``k``
    the gradient ``grad f (.) * (x_{q,k} - 1)``.
    """

    alpha = 1.0 / math.e

    def __init__(self, engines, dset, perm_rng, horizon, record=False):
        if not dset.downward_closed:
            raise ConfigError("meta Frank-Wolfe needs a downward-closed decision set")
        self.engines = list(engines)
        self.L = len(self.engines)
        if self.L < 1:
            raise ConfigError("need at least one inner engine")
        self.dset = dset
        self.T = int(horizon)
        if self.T % self.L:
            raise ConfigError(f"horizon {self.T} is not divisible by block size {self.L}")
        for eng in self.engines:
            if eng.T != self.T // self.L:
                raise ConfigError(f"inner engines need horizon {self.T // self.L}, got {eng.T}")
        self.n, self.d = self.engines[0].n, self.engines[0].d
        self.perm_rng = perm_rng
        self.name = f"dmfw+{self.engines[0].name}"
        self.record = record
        self.chains = []
        self.fed_norm_max = 0.0
        self.exchanges = []
        self.chain = None
        self.slot = None
        self.block = None
        self.x = None

    def start_block(self, q):
        V = np.stack([eng.decisions() for eng in self.engines])
        self.chain = fw_chain(V)
        self.block = q - 1
        self.x = self.chain[self.L]
        perm = self.perm_rng.permutation(self.L)
        # perm[k] is the in-block offset of t_{q,k}; invert to look up k.
        self.slot = np.empty(self.L, dtype=int)
        self.slot[perm] = np.arange(self.L)
        if self.record:
            self.chains.append(self.chain.copy())
        return self.x

    def play(self, t):
        if t % self.L == 0:
            self.start_block(t // self.L + 1)
        return self.x

    def feed(self, t, oracle):
        if t >= self.T:
            raise HorizonExhausted(f"meta Frank-Wolfe horizon {self.T} exhausted")
        if self.chain is None or t // self.L != self.block:
            raise ValueError(f"round {t} is outside the active block")
        k = int(self.slot[t % self.L])
        point = self.chain[k]
        g = oracle(t, point) * (point - 1.0)
        self.fed_norm_max = max(self.fed_norm_max, float(np.linalg.norm(g, axis=1).max()))
        self.engines[k].update(g)
        self.exchanges.append(self.engines[k].exchanges[-1])


def permutation_unbiasedness_check(grad_fns, chain_points, trials, rng, max_se=4.0):
    """Monte Carlo check that the shared permutation feeds unbiased gradients.

    ``grad_fns[o]`` is the gradient map of the block's ``o``-th round and
    ``chain_points[k]`` the fixed chain point of engine ``k``.  For every
    ``k`` the mean of ``grad f_{t_{q,k}}(x_k) * (x_k - 1)`` over random
    permutations must match the block average within ``max_se`` standard
    errors per coordinate.
    """
    from .evaluation import mc_mean_test

    L = len(grad_fns)
    fed = np.array([[grad_fns[o](chain_points[k]) * (chain_points[k] - 1.0) for o in range(L)] for k in range(L)])
    target = fed.mean(axis=1)
    perms = np.array([rng.permutation(L) for _ in range(trials)])
    ok = True
    for k in range(L):
        samples = fed[k][perms[:, k]]
        ok &= mc_mean_test(samples, target[k], max_se)
    return bool(ok)
