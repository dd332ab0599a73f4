"""Assemble and execute configured runs and horizon sweeps."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config as config_mod
from .doco import default_params, engine_block, make_engine, pad_horizon
from .errors import ConfigError
from .evaluation import (
    OfflineOptimum,
    Quadratic,
    build_trace,
    global_rewards,
    mean_se,
    offline_opt,
    sublinearity_fit,
)
from .network import build_lazy_metropolis, make_topology, read_edge_list, spectral
from .reductions import BoostingReduction, GradientOracle, LinearFeed, MetaFrankWolfe
from .rewards import MONOTONE_SCALE, NONMONOTONE_SCALE, RewardSequence, linear_losses, make_sequence
from .seeding import Streams
from .sets import make_set

log = logging.getLogger(__name__)

MIN_SLOPE_POINTS = 4


@dataclass
class Setup:
    """Everything a run needs, before any round is played."""

    cfg: dict
    seed: int
    nominal_T: int
    T: int
    topology: object
    mixing: object
    profile: object
    dset: object
    seq: RewardSequence
    learner: object
    oracle: object
    G: float
    params: dict = field(default_factory=dict)


@dataclass
class RunResult:
    setup: Setup
    X: np.ndarray
    trace: object
    opt: OfflineOptimum
    exchanges: np.ndarray

    @property
    def final_regret(self):
        return self.trace.final

    def summary(self):
        s = self.setup
        return {
            "algo": self.trace.algo,
            "alpha": self.trace.alpha,
            "seed": s.seed,
            "T": s.T,
            "nominal_T": s.nominal_T,
            "final_alpha_regret": self.trace.final.tolist(),
            "max_consensus_err": float(self.trace.consensus.max(initial=0.0)),
            "exchanges_per_round": float(self.exchanges.mean()) if self.exchanges.size else 0.0,
            "max_exchanges_per_round": int(self.exchanges.max(initial=0)),
            "opt_value": self.opt.value,
            "opt_method": self.opt.method,
            "params": s.params,
        }


def build_topology(cfg, streams):
    spec = dict(cfg["topology"])
    spec.setdefault("n", cfg["n"])
    if spec["kind"] == "edges" and "file" in spec:
        topo = read_edge_list(spec["file"], n=cfg["n"])
    else:
        spec.pop("file", None)
        topo = make_topology(spec, streams.rng("net"))
    if topo.n != cfg["n"]:
        raise ConfigError(f"topology has {topo.n} nodes, config says n={cfg['n']}")
    return topo


def _linear_sequence(seed, T, n, d, G):
    c = linear_losses(seed, T, n, d, G)
    return RewardSequence(np.zeros((T, n, d, d)), -c, np.zeros((T, n)), 0.0, monotone=False, seed=seed)


def _rewards(cfg, streams, T):
    r = cfg["rewards"]
    seed = streams.int_seed("rewards")
    if r["mode"] == "linear":
        return _linear_sequence(seed, T, cfg["n"], cfg["d"], r.get("G", 1.0))
    return make_sequence(
        seed,
        T,
        cfg["n"],
        cfg["d"],
        monotone=r["mode"] == "monotone",
        density=r.get("density", 1.0),
        noise=r.get("noise", 0.0),
        h_scale=r.get("h_scale", 1.0),
        H_scale=r.get("H_scale", 1.0),
    )


def _override(params, algo):
    changes = {k: algo[k] for k in ("L", "K", "theta", "eta") if k in algo}
    return dataclasses.replace(params, **changes)


def plan(cfg, profile, G_inner, d, T):
    """Engine parameters and the horizon multiple they require."""
    algo = cfg["algorithm"]
    kind = algo["engine"]
    if algo["reduction"] == "dmfw":
        outer = default_params(profile, G_inner, d, T, "dmfw-inner")
        L = algo.get("L", outer.L)
        inner_T = max(1, T // L)
        if kind == "d-ftpl":
            block = algo.get("inner_L", profile.c_prime(T, L))
            eta = algo.get("eta", G_inner * math.sqrt(d * inner_T * block))
            inner = dataclasses.replace(outer, L=block, K=None, eta=eta)
        elif kind == "ad-ospa":
            inner = default_params(profile, G_inner, d, inner_T, algo.get("role", "smooth-doco"))
            if "inner_L" in algo:
                inner = dataclasses.replace(inner, L=algo["inner_L"])
            if "eta" in algo:
                inner = dataclasses.replace(inner, eta=algo["eta"])
        else:
            inner = dataclasses.replace(outer, L=1, K=None)
        return {"outer_L": L, "inner": inner, "multiple": L * engine_block(kind, inner)}
    if kind == "ad-ospa":
        params = default_params(profile, G_inner, d, T, algo.get("role", "smooth-doco"))
    elif kind == "d-ftpl":
        params = default_params(profile, G_inner, d, T, "dftpl")
    else:
        params = default_params(profile, G_inner, d, T, "linear-doco")
        params = dataclasses.replace(params, L=1, K=None, theta=None, eta=0.0)
    params = _override(params, algo)
    return {"inner": params, "multiple": engine_block(kind, params)}


def _rescale_eta(p, algo, G_inner, d, T):
    """Recompute the default ``eta`` at the padded horizon."""
    if "eta" in algo or algo["engine"] == "d-ogd":
        return p
    inner = p["inner"]
    if "outer_L" in p:
        horizon = T // p["outer_L"]
    else:
        horizon = T
    inner = dataclasses.replace(inner, eta=G_inner * math.sqrt(d * horizon * inner.L))
    return {**p, "inner": inner}


def setup_run(cfg, seed=None, record=False):
    """Validate ``cfg`` and instantiate every component for one seed."""
    config_mod.validate(cfg)
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    streams = Streams(seed)
    n, d, nominal_T = cfg["n"], cfg["d"], cfg["T"]
    topo = build_topology(cfg, streams)
    mixing = build_lazy_metropolis(topo)
    profile = spectral(mixing)
    dset = make_set(cfg["set"], d)
    algo = cfg["algorithm"]
    reduction = algo["reduction"]

    # Block sizes do not depend on G, so a unit-G plan fixes the padding.
    T = pad_horizon(nominal_T, plan(cfg, profile, 1.0, d, nominal_T)["multiple"])
    if T != nominal_T:
        log.warning("horizon padded from nominal T=%d to T=%d", nominal_T, T)
    seq = _rewards(cfg, streams, T)
    G = seq.G
    if reduction == "boosting":
        mode = algo.get("mode", "monotone" if cfg["rewards"]["mode"] == "monotone" else "nonmonotone")
        G_inner = G * (MONOTONE_SCALE if mode == "monotone" else NONMONOTONE_SCALE)
    else:
        mode = None
        G_inner = G
    p = plan(cfg, profile, G_inner, d, nominal_T)
    if T != nominal_T:
        p = _rescale_eta(p, algo, G_inner, d, T)

    inner = p["inner"]
    if reduction == "dmfw":
        L = p["outer_L"]
        engines = [
            make_engine(algo["engine"], mixing, dset, T // L, streams.node_rngs(f"engine.{k}", n), inner, G_inner, record=record)
            for k in range(L)
        ]
        learner = MetaFrankWolfe(engines, dset, streams.rng("permutation"), T, record=record)
    else:
        engine = make_engine(algo["engine"], mixing, dset, T, streams.node_rngs("engine", n), inner, G_inner, record=record)
        if reduction == "boosting":
            learner = BoostingReduction(engine, dset, mode, streams.node_rngs("boost", n), record=record)
        else:
            learner = LinearFeed(engine, -seq.h)
    oracle = GradientOracle(seq, streams.node_rngs("oracle", n))
    params = {
        "sigma2": profile.sigma2,
        "rho": profile.rho,
        "C": profile.C,
        "theta": profile.theta,
        "G": G,
        "G_inner": G_inner,
        "R": dset.radius,
        "L": inner.L,
        "K": inner.K,
        "engine_theta": inner.theta,
        "eta": inner.eta,
    }
    if reduction == "dmfw":
        params["outer_L"] = p["outer_L"]
    return Setup(cfg, seed, nominal_T, T, topo, mixing, profile, dset, seq, learner, oracle, G, params)


def play(setup):
    """Run every round; returns the ``(T, n, d)`` decision array."""
    learner, oracle = setup.learner, setup.oracle
    X = np.empty((setup.T, setup.seq.n, setup.seq.d))
    for t in range(setup.T):
        X[t] = learner.play(t)
        learner.feed(t, oracle)
    return X


def learner_exchanges(learner):
    if isinstance(learner, MetaFrankWolfe):
        return np.asarray(learner.exchanges, dtype=int)
    return np.asarray(learner.engine.exchanges, dtype=int)


def comparator(setup):
    cfg = setup.cfg
    if cfg["rewards"]["mode"] == "linear":
        total = setup.seq.h_sum.sum(axis=0)
        x = setup.dset.lmo(total)
        return OfflineOptimum(x, float(total @ x), "lmo", 0.0)
    off = cfg.get("offline", {})
    return offline_opt(
        Quadratic.from_sequence(setup.seq),
        setup.dset,
        resolution=off.get("resolution"),
        rng=Streams(setup.seed).rng("offline"),
        method=off.get("method", "auto"),
    )


def finish(setup, X):
    opt = comparator(setup)
    inst = global_rewards(setup.seq, X)
    algo_name = setup.learner.name
    trace = build_trace(algo_name, setup.learner.alpha, setup.seed, inst, setup.seq.prefix_values(opt.x), X, meta=setup.params)
    return RunResult(setup, X, trace, opt, learner_exchanges(setup.learner))


def simulate(cfg, seed=None, record=False):
    setup = setup_run(cfg, seed, record=record)
    return finish(setup, play(setup))


def recompute_regret(setup, X, x_star):
    """Alpha-regret series rebuilt from decisions alone (round-trip check)."""
    inst = global_rewards(setup.seq, X)
    trace = build_trace(setup.learner.name, setup.learner.alpha, setup.seed, inst, setup.seq.prefix_values(x_star), X)
    return trace.regret


# ---------------------------------------------------------------------------
# sweeps


def final_regret(cfg, T, seed):
    """Worst-node final alpha-regret of one ``(T, seed)`` job."""
    run = simulate(config_mod.with_overrides(cfg, T=int(T)), seed)
    return float(np.max(run.final_regret))


def _job(args):
    fn, cfg, T, seed = args
    return T, seed, fn(cfg, T, seed)


@dataclass(frozen=True)
class SweepRow:
    T: int
    mean_final_regret: float
    se: float
    slope_so_far: float | None


def sweep(cfg, Ts, seeds, jobs=1, run_fn=final_regret):
    """Mean final regret over ``seeds`` for each horizon, plus running slopes."""
    Ts = sorted(int(T) for T in Ts)
    tasks = [(run_fn, cfg, T, s) for T in Ts for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(a) for a in tasks]
    by_T = {T: [] for T in Ts}
    for T, _, r in results:
        by_T[T].append(r)
    rows = []
    for k, T in enumerate(Ts):
        mean, se = mean_se(by_T[T])
        slope = None
        if k + 1 >= MIN_SLOPE_POINTS:
            try:
                slope = sublinearity_fit([(rT, rr.mean_final_regret) for rT, rr in zip(Ts, rows)] + [(T, mean)]).slope
            except ValueError:
                slope = None
        rows.append(SweepRow(T, mean, se, slope))
    if len(Ts) < MIN_SLOPE_POINTS:
        log.warning("only %d horizons; slope needs at least %d", len(Ts), MIN_SLOPE_POINTS)
    return rows


def sweep_csv(rows, config_hash=None):
    lines = []
    if config_hash is not None:
        lines.append(f"# config_hash={config_hash}")
    lines.append("T,mean_final_regret,se,slope_so_far")
    for r in rows:
        slope = "" if r.slope_so_far is None else repr(r.slope_so_far)
        lines.append(f"{r.T},{r.mean_final_regret!r},{r.se!r},{slope}")
    return "\n".join(lines) + "\n"
