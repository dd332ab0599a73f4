"""Offline comparators, regret traces, consensus metrics and statistics.

The comparator of the alpha-regret is one fixed point ``x*`` maximizing the
full-horizon sum ``sum_t f_t``.  For quadratic rewards that sum is a single
quadratic, so it is searched on a grid (``d <= 4``) and by multi-start
projected ascent; both answers are kept and compared.
"""

from __future__ import annotations

import io
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

log = logging.getLogger(__name__)

TRACE_HEADER = "round,node,algo,alpha,seed,inst_reward,cum_reward,alpha_regret,consensus_err"
GRID_MAX_DIM = 4
ASCENT_STARTS = 32
_GRID_BUDGET = 2_000_000
_CHUNK = 200_000


# ---------------------------------------------------------------------------
# offline optimum


@dataclass(frozen=True)
class Quadratic:
    """``q(x) = 0.5 x'Hx + h'x + c`` (the summed objective)."""

    H: np.ndarray
    h: np.ndarray
    c: float = 0.0

    def value(self, X):
        X = np.asarray(X, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", X, self.H, X) + X @ self.h + self.c

    def grad(self, X):
        return np.asarray(X, dtype=float) @ self.H + self.h

    @property
    def lipschitz(self):
        """Gradient-norm bound over the unit cube."""
        lo = self.h + np.minimum(self.H, 0).sum(axis=1)
        hi = self.h + np.maximum(self.H, 0).sum(axis=1)
        return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))

    @classmethod
    def from_sequence(cls, seq):
        H, h, c = seq.total()
        return cls(H, h, c)

    @classmethod
    def linear(cls, c):
        c = np.asarray(c, dtype=float)
        return cls(np.zeros((c.size, c.size)), c, 0.0)


@dataclass(frozen=True)
class OfflineOptimum:
    x: np.ndarray
    value: float
    method: str
    gap: float
    grid_value: float | None = None
    ascent_value: float | None = None
    flagged: bool = False


def default_resolution(d):
    """Finest uniform spacing keeping the grid under a couple million points."""
    per_axis = int(_GRID_BUDGET ** (1.0 / d)) - 1
    return 1.0 / max(1, min(200, per_axis))


def _axis(lo, hi, res):
    if hi - lo <= 0:
        return np.array([lo])
    m = int(math.floor((hi - lo) / res + 1e-9))
    pts = lo + res * np.arange(m + 1)
    if hi - pts[-1] > 1e-12:
        pts = np.append(pts, hi)
    return pts


def grid_search(obj, dset, resolution):
    d = dset.d
    if d > GRID_MAX_DIM:
        raise ValueError(f"grid search refused for d={d} > {GRID_MAX_DIM}")
    if dset.kind == "box":
        axes = [_axis(lo, hi, resolution) for lo, hi in zip(dset.lower, dset.upper)]
    else:
        axes = [_axis(0.0, 1.0, resolution)] * d
    shape = tuple(a.size for a in axes)
    total = int(np.prod(shape))
    best_val, best_x = -np.inf, None
    for start in range(0, total, _CHUNK):
        idx = np.unravel_index(np.arange(start, min(total, start + _CHUNK)), shape)
        X = np.stack([axes[j][idx[j]] for j in range(d)], axis=1)
        X = X[dset.contains(X, tol=0.0)]
        if not len(X):
            continue
        vals = obj.value(X)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_x = float(vals[k]), X[k].copy()
    return best_x, best_val


def projected_ascent(obj, dset, rng, starts=ASCENT_STARTS, iters=3000, tol=1e-13):
    beta = float(np.linalg.norm(obj.H, 2)) if obj.H.size else 0.0
    step = 1.0 / beta if beta > 0 else 1.0
    X = dset.random_points(rng, starts)
    X[0] = dset.lmo(obj.h)
    for _ in range(iters):
        nxt = dset.project(X + step * obj.grad(X))
        moved = np.max(np.abs(nxt - X))
        X = nxt
        if moved < tol:
            break
    vals = obj.value(X)
    k = int(np.argmax(vals))
    return X[k].copy(), float(vals[k])


def offline_opt(obj, dset, resolution=None, rng=None, method="auto"):
    """Best fixed point for the summed objective ``obj``.

    ``obj`` is a :class:`Quadratic` or a reward sequence.  ``method`` is
    ``"grid"``, ``"ascent"`` or ``"auto"`` (both when ``d <= 4``).  The
    reported ``gap`` is the grid Lipschitz slack ``L * res * sqrt(d)``;
    ``flagged`` marks grid/ascent disagreement beyond it.
    """
    if not isinstance(obj, Quadratic):
        obj = Quadratic.from_sequence(obj)
    d = dset.d
    rng = np.random.default_rng(0) if rng is None else rng
    if method == "grid" and d > GRID_MAX_DIM:
        raise ValueError(f"grid search refused for d={d} > {GRID_MAX_DIM}")
    use_grid = method == "grid" or (method == "auto" and d <= GRID_MAX_DIM)
    use_ascent = method in ("ascent", "auto")
    res = default_resolution(d) if resolution is None else float(resolution)
    slack = obj.lipschitz * res * math.sqrt(d) if use_grid else 0.0
    gx = gv = ax = av = None
    if use_grid:
        gx, gv = grid_search(obj, dset, res)
    if use_ascent:
        ax, av = projected_ascent(obj, dset, rng)
    flagged = use_grid and use_ascent and abs(gv - av) > slack + 1e-9 * max(1.0, abs(av))
    if flagged:
        log.warning("grid (%r) and ascent (%r) optima disagree beyond slack %r", gv, av, slack)
    if gv is not None and (av is None or gv >= av):
        return OfflineOptimum(gx, gv, "grid", slack, gv, av, flagged)
    return OfflineOptimum(ax, av, "ascent", slack, gv, av, flagged)


# ---------------------------------------------------------------------------
# traces


@dataclass
class RegretTrace:
    """Per-round, per-node rewards and alpha-regret of one run.

    ``inst[t, i]`` is the global reward ``f_t(x_t^i)``; ``regret[t, i]`` is
    ``alpha * sum_{s<=t} f_s(x*) - sum_{s<=t} f_s(x_s^i)`` with the single
    full-horizon comparator ``x*`` (prefix values are for plotting; the
    final row is the reported alpha-regret).
    """

    algo: str
    alpha: float
    seed: int
    inst: np.ndarray
    cum: np.ndarray
    opt_prefix: np.ndarray
    regret: np.ndarray
    consensus: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.inst.shape[0]

    @property
    def n(self):
        return self.inst.shape[1]

    @property
    def final(self):
        return self.regret[-1]


def global_rewards(seq, X):
    """``f_t(x_t^i)`` for decisions ``X`` of shape ``(T, n, d)``."""
    X = np.asarray(X, dtype=float)
    quad = 0.5 * np.einsum("tni,tij,tnj->tn", X, seq.H_sum, X)
    return quad + np.einsum("tni,ti->tn", X, seq.h_sum) + seq.c_sum[:, None]


def consensus_series(X):
    """Per-round, per-node distance from the network-average decision."""
    X = np.asarray(X, dtype=float)
    return np.linalg.norm(X - X.mean(axis=1, keepdims=True), axis=2)


def alpha_regret(cum, alpha, opt_prefix):
    """``alpha * opt_t - cum_{t,i}`` broadcast over nodes."""
    return alpha * np.asarray(opt_prefix)[:, None] - np.asarray(cum)


def build_trace(algo, alpha, seed, inst, x_star_prefix, X, meta=None):
    inst = np.asarray(inst, dtype=float)
    cum = np.cumsum(inst, axis=0)
    opt_prefix = np.cumsum(np.asarray(x_star_prefix, dtype=float))
    return RegretTrace(
        algo=algo,
        alpha=float(alpha),
        seed=int(seed),
        inst=inst,
        cum=cum,
        opt_prefix=opt_prefix,
        regret=alpha_regret(cum, alpha, opt_prefix),
        consensus=consensus_series(X),
        meta=dict(meta or {}),
    )


def _fmt(v):
    return repr(float(v))


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def trace_csv(trace, config_hash=None):
    buf = io.StringIO()
    if config_hash is not None:
        buf.write(f"# config_hash={config_hash}\n")
    buf.write(TRACE_HEADER + "\n")
    algo, alpha, seed = trace.algo, _fmt(trace.alpha), str(trace.seed)
    for t in range(trace.T):
        for i in range(trace.n):
            buf.write(
                f"{t + 1},{i},{algo},{alpha},{seed},{_fmt(trace.inst[t, i])},{_fmt(trace.cum[t, i])},"
                f"{_fmt(trace.regret[t, i])},{_fmt(trace.consensus[t, i])}\n"
            )
    return buf.getvalue()


def write_trace(trace, path, config_hash=None):
    _atomic_write(path, trace_csv(trace, config_hash))


def decisions_csv(X, config_hash=None):
    X = np.asarray(X, dtype=float)
    T, n, d = X.shape
    buf = io.StringIO()
    if config_hash is not None:
        buf.write(f"# config_hash={config_hash}\n")
    buf.write("round,node," + ",".join(f"x{j}" for j in range(d)) + "\n")
    for t in range(T):
        for i in range(n):
            buf.write(f"{t + 1},{i}," + ",".join(_fmt(v) for v in X[t, i]) + "\n")
    return buf.getvalue()


def write_decisions(X, path, config_hash=None):
    _atomic_write(path, decisions_csv(X, config_hash))


def _data_lines(text):
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


def read_decisions(path):
    lines = _data_lines(Path(path).read_text())
    rows = [ln.split(",") for ln in lines[1:]]
    T = max(int(r[0]) for r in rows)
    n = max(int(r[1]) for r in rows) + 1
    d = len(rows[0]) - 2
    X = np.empty((T, n, d))
    for r in rows:
        X[int(r[0]) - 1, int(r[1])] = [float(v) for v in r[2:]]
    return X


def read_trace(path):
    """Parse a trace CSV into column arrays keyed by header name."""
    lines = _data_lines(Path(path).read_text())
    header = lines[0].split(",")
    if ",".join(header) != TRACE_HEADER:
        raise ValueError(f"unexpected trace header {lines[0]!r}")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, v in zip(header, ln.split(",")):
            cols[h].append(v)
    out = {}
    for h, vals in cols.items():
        if h in ("round", "node", "seed"):
            out[h] = np.array([int(v) for v in vals])
        elif h == "algo":
            out[h] = np.array(vals)
        else:
            out[h] = np.array([float(v) for v in vals])
    return out


def config_hash_of(path):
    """Config hash stored in a CSV header comment, if any."""
    with open(path) as fh:
        first = fh.readline().strip()
    if first.startswith("# config_hash="):
        return first.split("=", 1)[1]
    return None


# ---------------------------------------------------------------------------
# regret-growth fits and statistics


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    used: int
    excluded: int


def sublinearity_fit(points):
    """Least-squares slope of ``log(regret)`` against ``log(T)``.

    Nonpositive regrets cannot be placed on a log scale; they are dropped
    with a warning.  Raises ``ValueError`` when fewer than two usable
    points remain.
    """
    pts = [(float(T), float(r)) for T, r in points]
    keep = [(T, r) for T, r in pts if r > 0 and T > 0]
    dropped = len(pts) - len(keep)
    if dropped:
        log.warning("sublinearity fit: excluded %d nonpositive regret value(s)", dropped)
    if len(keep) < 2:
        raise ValueError(f"need at least two positive points for a slope, got {len(keep)}")
    lt = np.log([T for T, _ in keep])
    lr = np.log([r for _, r in keep])
    slope, intercept = np.polyfit(lt, lr, 1)
    return SlopeFit(float(slope), float(intercept), len(keep), dropped)


def ks_statistic(samples, cdf):
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("KS statistic of an empty sample")
    return float(stats.kstest(samples, cdf).statistic)


def mc_mean_test(samples, target, max_se=4.0):
    """Coordinatewise ``|mean - target| <= max_se * sd / sqrt(N)``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0 or samples.shape[0] == 0:
        raise ValueError("mean test on an empty sample")
    N = samples.shape[0]
    mean = samples.mean(axis=0)
    sd = samples.std(axis=0, ddof=1) if N > 1 else np.zeros_like(mean)
    target = np.asarray(target, dtype=float)
    # Summation round-off, so that constant samples equal to target pass.
    slack = 4 * N * np.finfo(float).eps * np.maximum(np.abs(mean), np.abs(target))
    return bool(np.all(np.abs(mean - target) <= max_se * sd / math.sqrt(N) + slack))


def mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def cumulative_consensus(X):
    """``sum_t sum_j ||x_t^j - x_t^i||`` for every node ``i``."""
    X = np.asarray(X, dtype=float)
    diff = X[:, :, None, :] - X[:, None, :, :]
    return np.linalg.norm(diff, axis=-1).sum(axis=(0, 1))


def boosting_decomposition(reduction, seq, X, x_star, G):
    """Both sides of the reduction inequality for one recorded run.

    Returns ``(lhs, inner, cons)`` per node: ``lhs = alpha sum f_t(x*) -
    sum f_t(x_t^i)``, ``inner`` the engine's regret on the fed linear
    losses against ``x*``, and ``cons`` the cumulative consensus error of
    the engine decisions (multiplied by ``G`` by the caller's bound).
    """
    xhat = np.asarray(reduction.x_hat)
    fed = np.asarray(reduction.fed)
    opt = float(seq.prefix_values(x_star).sum())
    lhs = reduction.alpha * opt - global_rewards(seq, X).sum(axis=0)
    S = fed.sum(axis=1)
    inner = np.einsum("td,tid->i", S, x_star[None, None, :] - xhat)
    cons = cumulative_consensus(xhat)
    return lhs, inner, cons
