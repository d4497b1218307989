"""Multiplex graph container and its text serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

SCHEMA_VERSION = 1
N_FEATURES = 6
FEATURE_NAMES = ("volume", "thickness", "fa", "md", "aux1", "aux2")
CHANNELS = ("sc_weight", "fc_corr")


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MultiplexGraph:
    """One node set with a union edge list carrying [SC weight, FC corr] channels.

    ``edges`` holds undirected pairs with ``u < v`` in lexicographic order.
    An absent channel has attribute 0 and mask False.
    """

    features: np.ndarray          # (N, 6)
    edges: np.ndarray             # (M, 2) int64
    edge_attrs: np.ndarray        # (M, 2)
    channel_present: np.ndarray   # (M, 2) bool
    community: np.ndarray         # (N,) int64
    site: np.ndarray              # (N,) int64
    n_communities: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.features.shape[0]
        e = self.edges
        if e.ndim != 2 or e.shape[1] != 2:
            raise GraphError(f"edges must be (M, 2), got {e.shape}")
        if len(e):
            if np.any(e[:, 0] >= e[:, 1]):
                raise GraphError("edges must satisfy u < v (no self-loops)")
            if e.min() < 0 or e.max() >= n:
                raise GraphError("edge endpoint out of range")
            key = e[:, 0] * n + e[:, 1]
            if np.any(np.diff(key) <= 0):
                raise GraphError("edges must be sorted and free of duplicates")
        m = len(e)
        if self.edge_attrs.shape != (m, 2) or self.channel_present.shape != (m, 2):
            raise GraphError("edge_attrs / channel_present must be (M, 2)")
        if m and not self.channel_present.any(axis=1).all():
            raise GraphError("every edge needs at least one channel present")
        if np.any(self.edge_attrs[~self.channel_present] != 0):
            raise GraphError("absent channels must carry attribute 0")
        if self.community.shape != (n,) or self.site.shape != (n,):
            raise GraphError("community / site must have one entry per node")

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Unweighted symmetric union adjacency (CSR, sorted indices)."""
        return adjacency_from_edges(self.edges, self.n_nodes)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        a = self.adjacency
        return a.indptr.astype(np.int64), a.indices.astype(np.int64)

    @cached_property
    def degrees(self) -> np.ndarray:
        indptr, _ = self.csr
        return np.diff(indptr)

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices = self.csr
        return indices[indptr[v]:indptr[v + 1]]

    def without_edges(self, drop_pairs: np.ndarray) -> "MultiplexGraph":
        """Copy with the given (u<v) pairs removed from the union edge list."""
        n = self.n_nodes
        drop = set((np.asarray(drop_pairs, dtype=np.int64).reshape(-1, 2) @ [n, 1]).tolist())
        keep = np.array([k not in drop for k in (self.edges @ [n, 1]).tolist()], dtype=bool)
        return self.edge_subset(keep)

    def edge_subset(self, keep: np.ndarray) -> "MultiplexGraph":
        return MultiplexGraph(
            features=self.features, edges=self.edges[keep],
            edge_attrs=self.edge_attrs[keep], channel_present=self.channel_present[keep],
            community=self.community, site=self.site,
            n_communities=self.n_communities, meta=dict(self.meta))

    def edge_index(self, pairs: np.ndarray) -> np.ndarray:
        """Row in ``edges`` for each (u<v) pair, -1 when absent."""
        n = self.n_nodes
        key = self.edges @ np.array([n, 1])
        q = np.asarray(pairs, dtype=np.int64).reshape(-1, 2) @ np.array([n, 1])
        pos = np.searchsorted(key, q)
        pos = np.minimum(pos, max(len(key) - 1, 0))
        hit = (len(key) > 0) & (key[pos] == q) if len(key) else np.zeros(len(q), bool)
        return np.where(hit, pos, -1)


def adjacency_from_edges(edges: np.ndarray, n: int) -> sp.csr_matrix:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    a.sum_duplicates()
    a.sort_indices()
    a.data[:] = 1.0
    return a


def canonical_edges(pairs: np.ndarray, n: int) -> np.ndarray:
    """Sort pairs to u < v, drop self-loops and duplicates, lexicographic order."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    u = np.minimum(pairs[:, 0], pairs[:, 1])
    v = np.maximum(pairs[:, 0], pairs[:, 1])
    ok = u != v
    key = np.unique(u[ok] * n + v[ok])
    return np.stack([key // n, key % n], axis=1)


def simple_graph(n: int, edges, features=None, community=None, n_communities=None,
                 edge_attrs=None) -> MultiplexGraph:
    """Small helper for tests and references: union graph with SC-only channel."""
    e = canonical_edges(np.asarray(edges, dtype=np.int64).reshape(-1, 2), n)
    m = len(e)
    if features is None:
        features = np.zeros((n, N_FEATURES))
    if community is None:
        community = np.zeros(n, dtype=np.int64)
    if edge_attrs is None:
        attrs = np.zeros((m, 2))
        attrs[:, 0] = 1.0
        present = np.zeros((m, 2), dtype=bool)
        present[:, 0] = True
    else:
        attrs = np.asarray(edge_attrs, dtype=np.float64)
        present = attrs != 0
        present[~present.any(axis=1), 0] = True
    return MultiplexGraph(
        features=np.asarray(features, dtype=np.float64), edges=e,
        edge_attrs=attrs, channel_present=present,
        community=np.asarray(community, dtype=np.int64),
        site=np.zeros(n, dtype=np.int64),
        n_communities=int(n_communities or (int(np.max(community)) + 1 if n else 0)))


# -- serialization ---------------------------------------------------------

def graph_to_dict(g: MultiplexGraph, bundle=None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "multiplex_graph",
        "n_nodes": g.n_nodes,
        "n_communities": g.n_communities,
        "feature_names": list(FEATURE_NAMES),
        "channels": list(CHANNELS),
        "meta": g.meta,
        "community": g.community.tolist(),
        "site": g.site.tolist(),
        "features": g.features.tolist(),
        # one row per edge: u, v, sc, fc, sc_present, fc_present
        "edges": [[int(u), int(v), float(a), float(b), bool(p), bool(q)]
                  for (u, v), (a, b), (p, q) in zip(g.edges.tolist(), g.edge_attrs.tolist(),
                                                    g.channel_present.tolist())],
    }
    if bundle is not None:
        doc["labels"] = bundle.labels_block()
        doc["splits"] = bundle.splits_block()
    return doc


def graph_from_dict(doc: dict):
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise GraphError(f"unsupported schema version {doc.get('schema_version')!r}")
    rows = doc["edges"]
    m = len(rows)
    edges = np.array([r[:2] for r in rows], dtype=np.int64).reshape(m, 2)
    attrs = np.array([r[2:4] for r in rows], dtype=np.float64).reshape(m, 2)
    present = np.array([r[4:6] for r in rows], dtype=bool).reshape(m, 2)
    g = MultiplexGraph(
        features=np.array(doc["features"], dtype=np.float64).reshape(doc["n_nodes"], N_FEATURES),
        edges=edges, edge_attrs=attrs, channel_present=present,
        community=np.array(doc["community"], dtype=np.int64),
        site=np.array(doc["site"], dtype=np.int64),
        n_communities=int(doc["n_communities"]), meta=dict(doc.get("meta", {})))
    bundle = None
    if "labels" in doc:
        from ..synthgen.tasks import TaskBundle
        bundle = TaskBundle.from_blocks(doc["labels"], doc["splits"])
    return g, bundle


def save_graph(g: MultiplexGraph, path, bundle=None) -> Path:
    path = Path(path)
    # json float repr is shortest round-trip, so load(save(g)) is bit-exact
    path.write_text(json.dumps(graph_to_dict(g, bundle), separators=(",", ":")))
    return path


def load_graph(path, with_bundle: bool = False):
    g, bundle = graph_from_dict(json.loads(Path(path).read_text()))
    return (g, bundle) if with_bundle else g


def graphs_equal(a: MultiplexGraph, b: MultiplexGraph) -> bool:
    return (a.n_communities == b.n_communities
            and all(_bits_equal(getattr(a, f), getattr(b, f))
                    for f in ("features", "edges", "edge_attrs", "channel_present",
                              "community", "site")))


def _bits_equal(x: np.ndarray, y: np.ndarray) -> bool:
    return x.dtype == y.dtype and x.shape == y.shape and x.tobytes() == y.tobytes()
