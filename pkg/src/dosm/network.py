"""Communication graphs, mixing matrices and gossip primitives.

A network is an undirected connected graph over ``n`` learners together with
a symmetric, doubly stochastic, positive semidefinite mixing matrix
supported on that graph.  States exchanged over the network are stored as
``(n, d)`` arrays whose row ``i`` belongs to node ``i``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedGraphError, InvariantError

ROW_SUM_TOL = 1e-12
SIGMA2_MARGIN = 1e-12


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph over nodes ``0..n-1``."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        clean = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) is not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_edges(cls, n, edges):
        pairs = [tuple(e) for e in edges]
        keys = [(min(i, j), max(i, j)) for i, j in pairs]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate edges in edge list")
        return cls(n, frozenset(keys))

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self):
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def components(self):
        """Connected components as sorted lists of node ids."""
        ncomp, labels = connected_components(csr_matrix(self.adjacency()), directed=False)
        return [sorted(np.flatnonzero(labels == c).tolist()) for c in range(ncomp)]

    def is_connected(self):
        return len(self.components()) == 1

    def sorted_edges(self):
        return sorted(self.edges)


def path_graph(n):
    return Topology(n, frozenset((i, i + 1) for i in range(n - 1)))


def ring_graph(n):
    if n <= 2:
        return path_graph(n)
    return Topology(n, frozenset((min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)))


def complete_graph(n):
    return Topology(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def star_graph(n):
    return Topology(n, frozenset((0, j) for j in range(1, n)))


def grid_graph(rows, cols):
    edges = set()
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.add((k, k + 1))
            if r + 1 < rows:
                edges.add((k, k + cols))
    return Topology(rows * cols, frozenset(edges))


def random_connected_graph(n, rng, extra_edge_prob=0.2):
    """Random spanning tree plus independent extra edges (always connected)."""
    order = rng.permutation(n)
    edges = set()
    for pos in range(1, n):
        parent = order[rng.integers(pos)]
        child = order[pos]
        edges.add((min(parent, child), max(parent, child)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return Topology(n, frozenset((int(i), int(j)) for i, j in edges))


def make_topology(spec, rng=None):
    """Build a topology from a config mapping such as ``{"kind": "ring", "n": 8}``."""
    kind = spec["kind"]
    if kind == "edges":
        return Topology.from_edges(spec["n"], spec["edges"])
    if kind == "grid":
        return grid_graph(spec["rows"], spec["cols"])
    n = spec["n"]
    if kind == "path":
        return path_graph(n)
    if kind == "ring":
        return ring_graph(n)
    if kind == "complete":
        return complete_graph(n)
    if kind == "star":
        return star_graph(n)
    if kind == "random":
        if rng is None:
            raise ValueError("random topology needs an rng")
        return random_connected_graph(n, rng, spec.get("p", 0.2))
    raise ValueError(f"unknown topology kind {kind!r}")


# ---------------------------------------------------------------------------
# edge-list text format


def write_edge_list(topology, path=None):
    """Serialize as one ``"i j"`` line per edge (0-indexed).

    A leading ``# n <count>`` comment records isolated trailing nodes.
    Returns the text when ``path`` is None.
    """
    buf = io.StringIO()
    buf.write(f"# n {topology.n}\n")
    for i, j in topology.sorted_edges():
        buf.write(f"{i} {j}\n")
    text = buf.getvalue()
    if path is None:
        return text
    Path(path).write_text(text)
    return None


def parse_edge_list(text, n=None):
    edges = []
    declared = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n":
                declared = int(parts[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = declared
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return Topology.from_edges(n, edges)


def read_edge_list(path, n=None):
    return parse_edge_list(Path(path).read_text(), n=n)


# ---------------------------------------------------------------------------
# mixing matrices


@dataclass(frozen=True)
class MixingMatrix:
    """Validated gossip weights ``A`` together with the graph they live on."""

    weights: np.ndarray
    topology: Topology

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        problems = mixing_violations(w, self.topology)
        if problems:
            raise InvariantError("invalid mixing matrix: " + "; ".join(problems))

    @property
    def n(self):
        return self.weights.shape[0]

    def to_csv(self, path=None):
        lines = [",".join(repr(float(v)) for v in row) for row in self.weights]
        text = "\n".join(lines) + "\n"
        if path is None:
            return text
        Path(path).write_text(text)
        return None


def mixing_violations(A, topology=None, tol=ROW_SUM_TOL):
    """List every violated mixing-matrix invariant (empty when valid)."""
    A = np.asarray(A, dtype=float)
    out = []
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return [f"matrix must be square, got shape {A.shape}"]
    n = A.shape[0]
    if topology is not None and topology.n != n:
        out.append(f"matrix size {n} does not match topology size {topology.n}")
    if not np.allclose(A, A.T, rtol=0.0, atol=tol):
        out.append("not symmetric")
    if np.max(np.abs(A.sum(axis=1) - 1.0)) > tol:
        out.append("rows do not sum to 1")
    if np.max(np.abs(A.sum(axis=0) - 1.0)) > tol:
        out.append("columns do not sum to 1")
    if np.any(A < -tol):
        out.append("negative entries")
    if topology is not None and topology.n == n:
        allowed = topology.adjacency() | np.eye(n, dtype=bool)
        if np.any((A > 0) & ~allowed):
            out.append("positive weight outside graph support")
    eig = np.linalg.eigvalsh((A + A.T) / 2)
    if eig[0] < -1e-10:
        out.append(f"not positive semidefinite (min eigenvalue {eig[0]:.3e})")
    if n > 1:
        mags = np.sort(np.abs(eig))[::-1]
        if mags[1] >= 1.0 - SIGMA2_MARGIN:
            out.append(f"second singular value {mags[1]:.15g} is not < 1")
    return out


def build_lazy_metropolis(topology):
    """Lazy Metropolis-Hastings weights ``A = (I + M) / 2``.

    ``M`` puts ``1 / (1 + max(deg_i, deg_j))`` on each edge and the remainder
    on the diagonal.  Lazification moves the spectrum of ``M`` from
    ``[-1, 1]`` into ``[0, 1]``, so ``A`` is positive semidefinite.
    """
    comps = topology.components()
    if len(comps) > 1:
        raise DisconnectedGraphError(comps)
    n = topology.n
    deg = topology.degrees()
    M = np.zeros((n, n))
    for i, j in topology.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        M[i, j] = M[j, i] = w
    M[np.diag_indices(n)] = 1.0 - M.sum(axis=1)
    A = 0.5 * (np.eye(n) + M)
    return MixingMatrix(A, topology)


@dataclass(frozen=True)
class SpectralProfile:
    """Spectral quantities of a mixing matrix that set the algorithm constants."""

    n: int
    sigma2: float
    rho: float
    C: int
    theta: float

    def c_prime(self, horizon, block):
        """Inner block size ``2 * ceil(ln(sqrt(n) T / L) / rho)`` for meta Frank-Wolfe."""
        return 2 * math.ceil(math.log(math.sqrt(self.n) * horizon / block) / self.rho)

    def dftpl_block(self, horizon):
        """Block size ``2 * ceil(ln(sqrt(n) T) / rho)`` for perturbed-leader gossip."""
        return 2 * math.ceil(math.log(math.sqrt(self.n) * horizon) / self.rho)


def accelerated_budget(n, rho):
    return math.ceil(math.sqrt(2) * math.log(math.sqrt(14 * n)) / ((math.sqrt(2) - 1) * math.sqrt(rho)))


def chebyshev_theta(sigma2):
    return 1.0 / (1.0 + math.sqrt(1.0 - sigma2**2))


def second_singular_value(A):
    A = np.asarray(A, dtype=float)
    if A.shape[0] == 1:
        return 0.0
    eig = np.linalg.eigvalsh((A + A.T) / 2)
    mags = np.sort(np.abs(eig))[::-1]
    return float(mags[1])


def spectral(A):
    """Spectral profile of a mixing matrix (or raw weight array).

    Raises
    ------
    InvariantError
        If the second singular value is within ``1e-12`` of one, which
        means the graph is effectively disconnected.
    """
    W = A.weights if isinstance(A, MixingMatrix) else np.asarray(A, dtype=float)
    n = W.shape[0]
    s2 = second_singular_value(W)
    if s2 >= 1.0 - SIGMA2_MARGIN:
        raise InvariantError(f"sigma2 = {s2!r} is not < 1: graph is effectively disconnected")
    rho = 1.0 - s2
    return SpectralProfile(n=n, sigma2=s2, rho=rho, C=accelerated_budget(n, rho), theta=chebyshev_theta(s2))


# ---------------------------------------------------------------------------
# gossip


def _weights(A):
    return A.weights if isinstance(A, MixingMatrix) else np.asarray(A, dtype=float)


def gossip_step(A, states):
    """One round of weighted averaging: row ``i`` becomes ``sum_j A_ij states_j``."""
    W = _weights(A)
    X = np.asarray(states, dtype=float)
    if X.ndim != 2 or X.shape[0] != W.shape[0]:
        raise ValueError(f"states shape {X.shape} incompatible with {W.shape[0]} nodes")
    return W @ X


def chebyshev_gossip_step(A, theta, zk, zkm1):
    """Accelerated gossip ``(1 + theta) A z_k - theta z_{k-1}``."""
    W = _weights(A)
    zk = np.asarray(zk, dtype=float)
    zkm1 = np.asarray(zkm1, dtype=float)
    if zk.shape != zkm1.shape:
        raise ValueError(f"shape mismatch {zk.shape} vs {zkm1.shape}")
    if zk.ndim != 2 or zk.shape[0] != W.shape[0]:
        raise ValueError(f"states shape {zk.shape} incompatible with {W.shape[0]} nodes")
    return (1.0 + theta) * (W @ zk) - theta * zkm1


@dataclass(frozen=True)
class ConsensusError:
    per_node: np.ndarray
    max: float
    frobenius: float


def consensus_error(states):
    """Distance of every row from the column-mean row."""
    X = np.asarray(states, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    dev = np.linalg.norm(X - X.mean(axis=0, keepdims=True), axis=1)
    return ConsensusError(per_node=dev, max=float(dev.max(initial=0.0)), frobenius=float(np.sqrt(np.sum(dev**2))))
