"""Decentralized online linear/convex optimization engines.

Every engine exposes the same gradient-fed contract::

    X = engine.decisions()      # (n, d): node i plays row i this round
    engine.update(G)            # (n, d): loss gradients at the played rows

and performs a bounded number of gossip exchanges per round, recorded in
``engine.exchanges``.  Three engines are provided:

* :class:`AdOspa` -- blocked perturbed leader fed by Chebyshev-accelerated
  gossip of cumulative gradients (two-block delay, L-sample smoothing).
* :class:`Dftpl` -- blocked perturbed leader whose half-blocks gossip the
  next decision and the previous block gradient with plain steps.
* :class:`Dogd` -- projection-based baseline: one gossip step on the
  decisions followed by a projected gradient step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, HorizonExhausted
from .network import chebyshev_gossip_step, consensus_error, gossip_step

ROLES = ("smooth-doco", "linear-doco", "dftpl", "dmfw-inner")


def ball_sample(rng, d, size=None):
    """Uniform draw(s) from the closed unit ball in ``R^d``."""
    shape = (d,) if size is None else tuple(np.atleast_1d(size)) + (d,)
    g = rng.standard_normal(shape)
    norms = np.linalg.norm(g, axis=-1, keepdims=True)
    g = g / np.where(norms == 0, 1.0, norms)
    r = rng.random(shape[:-1] + (1,)) ** (1.0 / d)
    return g * r


@dataclass(frozen=True)
class PerturbationSampler:
    eta: float
    d: int

    def __call__(self, rng, size=None):
        return self.eta * ball_sample(rng, self.d, size)


def icbrt_ceil(T):
    """Exact ``ceil(T ** (1/3))`` for nonnegative integers."""
    r = max(0, int(round(T ** (1.0 / 3.0))))
    while r**3 < T:
        r += 1
    while r > 0 and (r - 1) ** 3 >= T:
        r -= 1
    return r


def pad_horizon(T, multiple):
    """Smallest multiple of ``multiple`` that is ``>= T``."""
    return -(-int(T) // int(multiple)) * int(multiple)


@dataclass(frozen=True)
class EngineParams:
    L: int
    K: int | None
    theta: float | None
    eta: float


def dmfw_block(profile, T):
    """Outer block size ``L ~ (T / C')^{1/3}`` for meta Frank-Wolfe.

    ``C'`` itself depends on ``L``, so the rounding is iterated to a
    fixed point (it settles in a couple of steps).
    """
    L = 1
    for _ in range(50):
        cp = profile.c_prime(T, L)
        nxt = max(1, int(round((T / cp) ** (1.0 / 3.0))))
        if nxt == L:
            break
        L = nxt
    return L


def default_params(profile, G, d, T, role):
    """Prescribed default ``(L, K, theta, eta)`` for an engine role.

    ``smooth-doco`` and ``linear-doco`` configure :class:`AdOspa`; ``dftpl``
    configures :class:`Dftpl`.  ``dmfw-inner`` returns the meta Frank-Wolfe
    outer block ``L`` together with the inner perturbed-leader block
    ``K = C'(L)`` and the inner ``eta`` for horizon ``T / L``.
    """
    if role == "smooth-doco":
        L = max(icbrt_ceil(T), profile.C)
        return EngineParams(L, profile.C, profile.theta, G * math.sqrt(d * T * L))
    if role == "linear-doco":
        L = profile.C
        return EngineParams(L, profile.C, profile.theta, G * math.sqrt(d * T * L))
    if role == "dftpl":
        L = profile.dftpl_block(T)
        return EngineParams(L, None, None, G * math.sqrt(d * T * L))
    if role == "dmfw-inner":
        L = dmfw_block(profile, T)
        cp = profile.c_prime(T, L)
        return EngineParams(L, cp, None, G * math.sqrt(d * (T / L) * cp))
    raise ConfigError(f"unknown role {role!r}; expected one of {ROLES}")


class DocoEngine:
    """Shared bookkeeping for the gradient-fed engines."""

    name = "abstract"

    def __init__(self, mixing, dset, horizon, rngs, x0=None):
        self.A = mixing.weights if hasattr(mixing, "weights") else np.asarray(mixing, dtype=float)
        self.n = self.A.shape[0]
        self.dset = dset
        self.d = dset.d
        self.T = int(horizon)
        if len(rngs) != self.n:
            raise ValueError(f"need one rng per node, got {len(rngs)} for n={self.n}")
        self.rngs = list(rngs)
        x0 = dset.lmo(np.zeros(self.d)) if x0 is None else np.asarray(x0, dtype=float)
        if not dset.contains(x0):
            raise ConfigError("initial decision is not feasible")
        self.x0 = x0
        self.t = 0
        self.exchanges = []

    def _check_round(self, grads):
        if self.t >= self.T:
            raise HorizonExhausted(f"{self.name} horizon {self.T} exhausted")
        grads = np.asarray(grads, dtype=float)
        if grads.shape != (self.n, self.d):
            raise ValueError(f"gradients must have shape {(self.n, self.d)}, got {grads.shape}")
        return grads

    def decisions(self):
        raise NotImplementedError

    def update(self, grads):
        raise NotImplementedError


class AdOspa(DocoEngine):
    """Blocked perturbed leader with accelerated gossip of gradient sums.

    Decisions are constant over blocks of ``L`` rounds.  In block ``q >= 2``
    the first ``K`` rounds each run one Chebyshev gossip step on the
    buffers ``z_{q,k}``.  At the end of block ``q`` the gossiped sum is
    stored as ``z_q``, the block gradient is folded into the next
    buffers, and (for ``q >= 2``) the next decision averages ``L``
    perturbed-leader responses to the two-blocks-old sum ``z_{q-1}``.
    """

    name = "ad-ospa"

    def __init__(self, mixing, dset, horizon, rngs, L, K, theta, eta, x0=None, record=False):
        super().__init__(mixing, dset, horizon, rngs, x0)
        if L < 1 or K < 0:
            raise ConfigError("need L >= 1 and K >= 0")
        if K > L:
            raise ConfigError(f"communication budget K={K} exceeds block size L={L}")
        if self.T % L:
            raise ConfigError(f"horizon {self.T} is not divisible by block size {L}")
        self.L, self.K, self.theta, self.eta = int(L), int(K), float(theta), float(eta)
        shape = (self.n, self.d)
        self.z_last = np.zeros(shape)   # z_{q-1}
        self.zk = np.zeros(shape)       # z_{q,k}
        self.zkm1 = np.zeros(shape)     # z_{q,k-1}
        self.g = np.zeros(shape)
        self.gbar_sum = np.zeros(self.d)
        self.x = np.tile(self.x0, (self.n, 1))
        self.record = record
        self.z_history = []      # (q, z_q) for q >= 2
        self.zbar_history = []   # matching network averages of raw sums

    def decisions(self):
        return self.x

    def update(self, grads):
        grads = self._check_round(grads)
        q, k = divmod(self.t, self.L)
        q += 1
        self.g += grads
        ex = 0
        if q >= 2 and k < self.K:
            nxt = chebyshev_gossip_step(self.A, self.theta, self.zk, self.zkm1)
            self.zkm1, self.zk = self.zk, nxt
            ex = 1
        if k == self.L - 1:
            self._end_block(q)
        self.exchanges.append(ex)
        self.t += 1

    def _end_block(self, q):
        if q >= 2:
            z_q, z_qKm1 = self.zk, self.zkm1
            if self.record:
                self.z_history.append((q, z_q.copy()))
                self.zbar_history.append(self.gbar_sum.copy())
        else:
            z_q = np.zeros_like(self.zk)
            z_qKm1 = np.zeros_like(self.zk)
        if q >= 2:
            v = np.stack([ball_sample(rng, self.d, self.L) for rng in self.rngs])
            c = -self.z_last[:, None, :] + self.eta * v
            self.x = self.dset.lmo(c).mean(axis=1)
        self.gbar_sum = self.gbar_sum + self.g.mean(axis=0)
        self.z_last = z_q
        self.zk = z_q + self.g
        self.zkm1 = z_qKm1 + self.g
        self.g = np.zeros_like(self.g)

    def z_consensus(self):
        """Per-block ``max_i ||z_q^i - mean_j z_q^j||`` for recorded blocks."""
        return np.array([consensus_error(z).max for _, z in self.z_history])


class Dftpl(DocoEngine):
    """Decentralized perturbed leader with half-block plain gossip.

    Block ``q`` starts by answering the perturbed leader for the gossiped
    gradient sums of blocks ``1..q-2``.  Its first ``L/2`` rounds gossip that
    answer (it becomes the decision of block ``q+1``); its last ``L/2``
    rounds gossip the raw gradient sum of block ``q-1``.
    """

    name = "d-ftpl"

    def __init__(self, mixing, dset, horizon, rngs, L, eta, x0=None, record=False):
        super().__init__(mixing, dset, horizon, rngs, x0)
        if L < 2 or L % 2:
            raise ConfigError(f"block size must be even and >= 2, got {L}")
        if self.T % L:
            raise ConfigError(f"horizon {self.T} is not divisible by block size {L}")
        self.L, self.eta = int(L), float(eta)
        shape = (self.n, self.d)
        self.gsum = np.zeros(shape)
        self.graw = np.zeros(shape)
        self.gbuf = np.zeros(shape)
        self.gbuf_mean = np.zeros(self.d)
        self.x = np.tile(self.x0, (self.n, 1))
        self.record = record
        self.g_history = []   # (q-1, g_{q-1} after gossip, raw network mean)
        self.x_history = []   # (q+1, x_{q+1} after gossip)
        self.xbuf = self._leader()

    def _leader(self):
        v = np.stack([ball_sample(rng, self.d) for rng in self.rngs])
        return self.dset.lmo(-self.gsum + self.eta * v)

    def decisions(self):
        return self.x

    def update(self, grads):
        grads = self._check_round(grads)
        q, k = divmod(self.t, self.L)
        q += 1
        kx = k + 1
        half = self.L // 2
        self.graw += grads
        ex = 0
        if kx <= half:
            self.xbuf = gossip_step(self.A, self.xbuf)
            ex += 1
        if kx > half and q >= 2:
            self.gbuf = gossip_step(self.A, self.gbuf)
            ex += 1
        if kx == self.L:
            if q >= 2:
                self.gsum += self.gbuf
                if self.record:
                    self.g_history.append((q - 1, self.gbuf.copy(), self.gbuf_mean.copy()))
            self.x = self.xbuf
            if self.record:
                self.x_history.append((q + 1, self.x.copy()))
            self.gbuf = self.graw
            self.gbuf_mean = self.graw.mean(axis=0)
            self.graw = np.zeros_like(self.graw)
            if self.t + 1 < self.T:
                self.xbuf = self._leader()
        self.exchanges.append(ex)
        self.t += 1

    def g_consensus(self):
        return np.array([consensus_error(g).max for _, g, _ in self.g_history])

    def x_consensus(self):
        return np.array([consensus_error(x).max for _, x in self.x_history])


class Dogd(DocoEngine):
    """Gossip the decisions once, then take a projected gradient step.

    Step size ``eta_t = R / (G sqrt(t))`` with ``t`` counted from 1.
    """

    name = "d-ogd"

    def __init__(self, mixing, dset, horizon, rngs, G, x0=None, R=None):
        super().__init__(mixing, dset, horizon, rngs, x0)
        self.G = float(G)
        self.R = float(dset.radius if R is None else R)
        self.x = np.tile(self.x0, (self.n, 1))

    def step_size(self, t):
        if self.G == 0:
            return 0.0
        return self.R / (self.G * math.sqrt(t))

    def decisions(self):
        return self.x

    def update(self, grads):
        grads = self._check_round(grads)
        eta = self.step_size(self.t + 1)
        mixed = gossip_step(self.A, self.x)
        self.x = self.dset.project(mixed - eta * grads)
        self.exchanges.append(1)
        self.t += 1


def make_engine(kind, mixing, dset, horizon, rngs, params, G, x0=None, record=False):
    """Instantiate an engine from its kind name and :class:`EngineParams`."""
    if kind in ("ad-ospa", "adospa"):
        return AdOspa(mixing, dset, horizon, rngs, params.L, params.K, params.theta, params.eta, x0, record)
    if kind in ("d-ftpl", "dftpl"):
        return Dftpl(mixing, dset, horizon, rngs, params.L, params.eta, x0, record)
    if kind in ("d-ogd", "dogd"):
        return Dogd(mixing, dset, horizon, rngs, G, x0)
    raise ConfigError(f"unknown engine kind {kind!r}")


def engine_block(kind, params):
    """Block size the horizon must be divisible by."""
    if kind in ("d-ogd", "dogd"):
        return 1
    return params.L


def linear_regret(losses, decisions, dset):
    """D-OCO regret of every node on linear losses.

    ``losses`` is ``(T, n, d)`` and ``decisions`` is ``(T, n, d)``; node
    ``i`` is charged the global loss ``sum_j <c_t^j, x_t^i>`` and compared
    with the best fixed point, found by the LMO on the negated total.
    """
    total = losses.sum(axis=(0, 1))
    best = dset.lmo(-total)
    per_round = np.einsum("td,tid->ti", losses.sum(axis=1), decisions)
    return per_round.sum(axis=0) - float(total @ best)
