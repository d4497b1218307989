"""Classical graph measures on the unweighted union edge set."""
from __future__ import annotations

import hashlib

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .. import kernels
from .graph import GraphError, MultiplexGraph, adjacency_from_edges, canonical_edges


def local_clustering(g: MultiplexGraph) -> np.ndarray:
    indptr, indices = g.csr
    tri = kernels.triangle_counts(indptr, indices)
    deg = np.diff(indptr)
    wedges = deg * (deg - 1) / 2
    out = np.zeros(g.n_nodes)
    ok = deg >= 2
    out[ok] = tri[ok] / wedges[ok]
    return out


def avg_clustering(g: MultiplexGraph) -> float:
    """Mean local clustering; nodes of degree < 2 contribute 0."""
    return float(local_clustering(g).mean()) if g.n_nodes else 0.0


def largest_component(g: MultiplexGraph) -> np.ndarray:
    _, labels = connected_components(g.adjacency, directed=False)
    counts = np.bincount(labels)
    # ties resolved to the component containing the lowest node id
    return np.flatnonzero(labels == labels[np.flatnonzero(counts[labels] == counts.max())[0]])


def avg_shortest_path(g: MultiplexGraph) -> float:
    """Mean BFS hop distance over unordered pairs of the largest component."""
    if g.n_nodes < 2:
        raise GraphError("average shortest path needs at least 2 nodes")
    nodes = largest_component(g)
    if len(nodes) < 2:
        raise GraphError("largest component has a single node")
    indptr, indices = g.csr
    dist_sum, reach = kernels.bfs_distance_sums(indptr, indices, nodes)
    # every ordered pair counted once per source
    return float(dist_sum.sum() / reach.sum())


def pagerank(g: MultiplexGraph, damping: float = 0.85, tol: float = 1e-9,
             max_iter: int = 10_000) -> np.ndarray:
    """Power iteration on the undirected union graph; dangling mass teleports uniformly."""
    n = g.n_nodes
    deg = g.degrees.astype(np.float64)
    inv = np.divide(1.0, deg, out=np.zeros(n), where=deg > 0)
    walk = (g.adjacency.T.multiply(inv)).tocsr()   # column-stochastic on non-dangling nodes
    dangling = deg == 0
    r = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = damping * (walk @ r + r[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        done = np.abs(nxt - r).sum() < tol * (1.0 - damping) / damping
        r = nxt
        if done:
            break
    return r


def pagerank_linear_solve(g: MultiplexGraph, damping: float = 0.85) -> np.ndarray:
    """Dense reference: solve (I - d·P^T) r = (1-d)/n + d·(dangling share)."""
    n = g.n_nodes
    a = g.adjacency.toarray()
    deg = a.sum(axis=1)
    p = np.where(deg[:, None] > 0, a / np.where(deg > 0, deg, 1)[:, None], 1.0 / n)
    m = np.eye(n) - damping * p.T
    r = np.linalg.solve(m, np.full(n, (1.0 - damping) / n))
    return r / r.sum()


def jaccard(g: MultiplexGraph, u: int, v: int) -> float:
    return float(jaccard_pairs(g, np.array([[u, v]]))[0])


def jaccard_pairs(g: MultiplexGraph, pairs: np.ndarray) -> np.ndarray:
    """|N(u)∩N(v)| / |N(u)∪N(v)| per pair; 0 for an empty union."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    indptr, indices = g.csr
    inter = kernels.common_neighbor_counts(indptr, indices, pairs[:, 0], pairs[:, 1])
    deg = np.diff(indptr)
    union = deg[pairs[:, 0]] + deg[pairs[:, 1]] - inter
    return np.divide(inter, union, out=np.zeros(len(pairs)), where=union > 0)


def _subset_mask(g: MultiplexGraph, subset) -> np.ndarray:
    subset = np.asarray(subset, dtype=np.int64)
    mask = np.zeros(g.n_nodes, dtype=bool)
    mask[subset] = True
    return mask


def internal_edge_count(g: MultiplexGraph, subset) -> int:
    mask = _subset_mask(g, subset)
    e = g.edges
    return int(np.count_nonzero(mask[e[:, 0]] & mask[e[:, 1]]))


def density(g: MultiplexGraph, subset) -> float:
    s = len(np.unique(subset))
    if s < 2:
        return 0.0
    return internal_edge_count(g, subset) / (s * (s - 1) / 2)


def conductance(g: MultiplexGraph, subset) -> float:
    """cut(S) / min(vol(S), vol(V∖S)); defined as 1 when that volume is 0."""
    mask = _subset_mask(g, subset)
    e = g.edges
    cut = np.count_nonzero(mask[e[:, 0]] != mask[e[:, 1]])
    deg = g.degrees
    vol_s = deg[mask].sum()
    vol_rest = deg[~mask].sum()
    denom = min(vol_s, vol_rest)
    if denom == 0:
        return 1.0
    return float(cut / denom)


def degree_bucket(deg: np.ndarray) -> np.ndarray:
    return np.minimum(deg, 5)


def _h(text: str) -> str:
    return hashlib.blake2b(text.encode("ascii"), digest_size=8).hexdigest()


def wl_labels(n: int, edges: np.ndarray, iterations: int = 3) -> list[list[str]]:
    """Label sequence per iteration, starting from degree buckets."""
    adj = [[] for _ in range(n)]
    for u, v in edges.tolist():
        adj[u].append(v)
        adj[v].append(u)
    deg = np.array([len(a) for a in adj], dtype=np.int64)
    labels = [f"d{b}" for b in degree_bucket(deg).tolist()]
    rounds = [labels]
    for _ in range(iterations):
        labels = [_h(labels[v] + "|" + ",".join(sorted(labels[w] for w in adj[v])))
                  for v in range(n)]
        rounds.append(labels)
    return rounds


def wl_hash(g: MultiplexGraph, subset, iterations: int = 3, dim: int = 128) -> np.ndarray:
    """Hashed, L1-normalized histogram of WL labels over all iterations of the induced subgraph.

    Rounds 0..iterations are all counted, so an isolated node contributes one
    degree-bucket label per round.
    """
    subset = np.unique(np.asarray(subset, dtype=np.int64))
    if len(subset) == 0:
        raise GraphError("wl_hash needs a non-empty subset")
    sub_edges = induced_edges(g, subset)
    vec = np.zeros(dim)
    for labels in wl_labels(len(subset), sub_edges, iterations):
        for lab in labels:
            vec[int(_h("bin:" + lab), 16) % dim] += 1.0
    return vec / vec.sum()


def induced_edges(g: MultiplexGraph, subset) -> np.ndarray:
    """Edges among ``subset`` relabeled to positions 0..s-1 of the sorted subset."""
    subset = np.unique(np.asarray(subset, dtype=np.int64))
    pos = np.full(g.n_nodes, -1, dtype=np.int64)
    pos[subset] = np.arange(len(subset))
    e = g.edges
    inside = (pos[e[:, 0]] >= 0) & (pos[e[:, 1]] >= 0)
    return pos[e[inside]]


def er_reference(n: int, m: int, seed) -> MultiplexGraph:
    """Uniform simple graph with exactly n nodes and m edges."""
    from .graph import simple_graph

    total = n * (n - 1) // 2
    if m < 0 or m > total:
        raise GraphError(f"cannot place {m} edges on {n} nodes (max {total})")
    rng = np.random.default_rng(seed)
    keys = np.sort(rng.choice(total, size=m, replace=False))
    # unrank pair index k -> (u, v) with u < v in row-major upper-triangle order
    row_start = np.cumsum(np.concatenate([[0], np.arange(n - 1, 0, -1)])).astype(np.int64)
    u = np.searchsorted(row_start, keys, side="right") - 1
    v = keys - row_start[u] + u + 1
    return simple_graph(n, np.stack([u, v], axis=1))


def er_clustering(n: int, m: int, seed) -> float:
    return avg_clustering(er_reference(n, m, seed))


__all__ = [
    "adjacency_from_edges", "avg_clustering", "avg_shortest_path", "canonical_edges",
    "conductance", "density", "er_reference", "induced_edges", "jaccard", "jaccard_pairs",
    "largest_component", "local_clustering", "pagerank", "pagerank_linear_solve", "wl_hash",
    "wl_labels",
]
