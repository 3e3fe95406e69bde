"""Graph topologies, gossip matrices, and spectral helpers for mesh networks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "GossipMatrix",
    "SpectralData",
    "build_line_graph",
    "build_cycle_graph",
    "build_complete_graph",
    "build_erdos_renyi",
    "graph_from_spec",
    "diameter",
    "metropolis_weights",
    "gossip_matrix",
    "spectral_data",
]

# Eigenvalues of I - W_tilde below this are treated as exactly zero when
# forming the pseudoinverse.
_PINV_CUTOFF = 1e-10

_ER_MAX_DRAWS = 1000


class GraphError(ValueError):
    """Invalid topology: malformed edges, disconnected graph, or bad parameters."""


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph on agents 0..m-1.

    ``neighbors[i]`` is the one-hop neighborhood of agent i *including i
    itself*, so one exchange round combines an agent's own value with its
    neighbors' values.
    """

    m: int
    edges: frozenset[tuple[int, int]]
    neighbors: tuple[tuple[int, ...], ...]

    def degree(self, i: int) -> int:
        return len(self.neighbors[i]) - 1

    def adjacency(self) -> np.ndarray:
        """0/1 adjacency matrix with zero diagonal."""
        a = np.zeros((self.m, self.m))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a


def _bfs_hops(neighbors: tuple[tuple[int, ...], ...], source: int) -> np.ndarray:
    hops = np.full(len(neighbors), -1, dtype=int)
    hops[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in neighbors[u]:
            if hops[v] < 0:
                hops[v] = hops[u] + 1
                queue.append(v)
    return hops


def _make_graph(m: int, edges) -> Graph:
    if m < 1:
        raise GraphError(f"agent count must be >= 1, got {m}")
    normalized = set()
    for i, j in edges:
        if i == j or not (0 <= i < m) or not (0 <= j < m):
            raise GraphError(f"invalid edge ({i}, {j}) for m={m}")
        normalized.add((min(i, j), max(i, j)))
    adjacency = [set() for _ in range(m)]
    for i, j in normalized:
        adjacency[i].add(j)
        adjacency[j].add(i)
    neighbors = tuple(tuple(sorted(adjacency[i] | {i})) for i in range(m))
    if np.any(_bfs_hops(neighbors, 0) < 0):
        raise GraphError("graph is disconnected")
    return Graph(m=m, edges=frozenset(normalized), neighbors=neighbors)


def build_line_graph(m: int) -> Graph:
    """Path graph 0-1-...-(m-1); diameter m-1."""
    return _make_graph(m, [(i, i + 1) for i in range(m - 1)])


def build_cycle_graph(m: int) -> Graph:
    if m < 3:
        return build_line_graph(m)
    return _make_graph(m, [(i, (i + 1) % m) for i in range(m)])


def build_complete_graph(m: int) -> Graph:
    return _make_graph(m, [(i, j) for i in range(m) for j in range(i + 1, m)])


def build_erdos_renyi(m: int, p: float, seed: int) -> Graph:
    """Sample G(m, p) repeatedly from a seeded generator until connected.

    The generator state advances deterministically between draws; the first
    connected draw is returned. Gives up after a fixed retry budget, which
    signals that p is too small for m.
    """
    if m < 2:
        raise GraphError(f"Erdos-Renyi sampling needs m >= 2, got {m}")
    if not (0.0 <= p <= 1.0):
        raise GraphError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    for _ in range(_ER_MAX_DRAWS):
        mask = rng.random(len(pairs)) < p
        try:
            return _make_graph(m, [e for e, keep in zip(pairs, mask) if keep])
        except GraphError:
            continue
    raise GraphError(
        f"no connected Erdos-Renyi draw in {_ER_MAX_DRAWS} attempts (m={m}, p={p})"
    )


def graph_from_spec(spec: dict) -> Graph:
    """Build a graph from a run-config mapping: {kind, m, p?, seed?}."""
    kind = spec.get("kind")
    m = spec.get("m")
    if not isinstance(m, int) or m < 1:
        raise GraphError(f"graph spec needs a positive integer 'm', got {m!r}")
    if kind == "line":
        return build_line_graph(m)
    if kind == "cycle":
        return build_cycle_graph(m)
    if kind == "complete":
        return build_complete_graph(m)
    if kind == "erdos_renyi":
        if "p" not in spec:
            raise GraphError("erdos_renyi graph spec needs 'p'")
        return build_erdos_renyi(m, float(spec["p"]), int(spec.get("seed", 0)))
    raise GraphError(f"unknown graph kind {kind!r}")


def diameter(g: Graph) -> int:
    """Exact hop diameter via BFS from every node; errors on disconnected input."""
    best = 0
    for s in range(g.m):
        hops = _bfs_hops(g.neighbors, s)
        if hops.min() < 0:
            raise GraphError("diameter of a disconnected graph")
        best = max(best, int(hops.max()))
    return best


def metropolis_weights(g: Graph) -> np.ndarray:
    """Metropolis-Hastings mixing weights, computable from local degrees.

    Off-diagonal: 1 / (1 + max(deg_i, deg_j)) on edges; the diagonal absorbs
    the remainder so every row sums to one.
    """
    w = np.zeros((g.m, g.m))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(g.degree(i), g.degree(j)))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


@dataclass(frozen=True)
class GossipMatrix:
    """Mixing pair (W_tilde, W) with W = (1-c) I + c W_tilde, c in (0, 1/2].

    One multiplication by W models one synchronous round of neighbor
    exchanges; the sparsity pattern of W matches the graph exactly.
    """

    graph: Graph
    W_tilde: np.ndarray
    c: float
    W: np.ndarray


def gossip_matrix(g: Graph, c: float = 0.5, W_tilde: np.ndarray | None = None) -> GossipMatrix:
    """Validate W_tilde against the graph and build W = (1-c) I + c W_tilde."""
    if not (0.0 < c <= 0.5):
        raise GraphError(f"mixing coefficient c must lie in (0, 1/2], got {c}")
    if W_tilde is None:
        W_tilde = metropolis_weights(g)
    W_tilde = np.asarray(W_tilde, dtype=float)
    if W_tilde.shape != (g.m, g.m):
        raise GraphError(f"W_tilde has shape {W_tilde.shape}, expected {(g.m, g.m)}")
    if not np.array_equal(W_tilde, W_tilde.T):
        raise GraphError("W_tilde must be symmetric")
    if np.abs(W_tilde.sum(axis=1) - 1.0).max() > 1e-12:
        raise GraphError("W_tilde rows must sum to 1")
    if np.any(np.diag(W_tilde) <= 0.0):
        raise GraphError("W_tilde must have a strictly positive diagonal")
    adj = g.adjacency()
    off = W_tilde - np.diag(np.diag(W_tilde))
    if np.any((off != 0.0) != (adj != 0.0)) or np.any(off[adj != 0.0] <= 0.0):
        raise GraphError("W_tilde sparsity pattern must match the graph edges")
    W = (1.0 - c) * np.eye(g.m) + c * W_tilde
    return GossipMatrix(graph=g, W_tilde=W_tilde, c=c, W=W)


@dataclass(frozen=True)
class SpectralData:
    """Eigen summary of a gossip matrix plus the dual-metric matrix.

    ``M = c^-1 pinv(I - W_tilde) - I`` weights the dual distance in the
    strongly convex merit; it is positive definite on the complement of the
    all-ones direction whenever c <= 1/2.
    """

    lambda2: float
    lambda_min: float
    M: np.ndarray


def spectral_data(gm: GossipMatrix) -> SpectralData:
    vals, vecs = np.linalg.eigh(gm.W_tilde)  # ascending order
    lambda2 = float(vals[-2]) if gm.graph.m > 1 else float("nan")
    lambda_min = float(vals[0])
    gap = 1.0 - vals
    inv = np.where(np.abs(gap) > _PINV_CUTOFF, 1.0 / np.where(gap == 0.0, 1.0, gap), 0.0)
    pinv = (vecs * inv) @ vecs.T
    M = pinv / gm.c - np.eye(gm.graph.m)
    return SpectralData(lambda2=lambda2, lambda_min=lambda_min, M=M)
