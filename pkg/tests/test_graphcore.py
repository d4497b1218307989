import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierssl import kernels
from hierssl.graphcore import (
    GraphError,
    MultiplexGraph,
    avg_clustering,
    avg_shortest_path,
    conductance,
    density,
    er_reference,
    graphs_equal,
    jaccard,
    load_graph,
    pagerank,
    pagerank_linear_solve,
    save_graph,
    simple_graph,
    wl_hash,
)
from hierssl.graphcore.metrics import wl_labels

from conftest import random_graph


def complete(n):
    return simple_graph(n, list(itertools.combinations(range(n), 2)))


# -- enumeration oracles ------------------------------------------------------------

def clustering_oracle(n, edges):
    adj = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    total = 0.0
    for v in range(n):
        nb = sorted(adj[v])
        if len(nb) < 2:
            continue
        pairs = list(itertools.combinations(nb, 2))
        total += sum(1 for a, b in pairs if b in adj[a]) / len(pairs)
    return total / n


def path_length_oracle(n, edges):
    """Floyd-Warshall on the largest component (lowest node id wins ties)."""
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v in edges:
        d[u][v] = d[v][u] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    comps = []
    seen = set()
    for v in range(n):
        if v not in seen:
            c = [w for w in range(n) if d[v][w] < inf]
            seen.update(c)
            comps.append(c)
    big = max(comps, key=len)
    vals = [d[i][j] for i, j in itertools.combinations(big, 2)]
    return sum(vals) / len(vals)


small_graphs = st.integers(3, 8).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(
        st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]),
        min_size=1, max_size=20)))


@settings(max_examples=150, deadline=None)
@given(small_graphs)
def test_clustering_and_path_length_match_enumeration(case):
    n, raw = case
    g = simple_graph(n, raw)
    edges = g.edges.tolist()
    assert avg_clustering(g) == pytest.approx(clustering_oracle(n, edges), abs=1e-15)
    assert avg_shortest_path(g) == pytest.approx(path_length_oracle(n, edges), abs=1e-15)


def test_clustering_examples():
    assert avg_clustering(complete(3)) == 1.0
    star = simple_graph(4, [(0, 1), (0, 2), (0, 3)])
    assert avg_clustering(star) == 0.0


def test_path_length_examples():
    assert avg_shortest_path(complete(4)) == 1.0
    assert avg_shortest_path(simple_graph(3, [(0, 1), (1, 2)])) == pytest.approx(4 / 3)
    with pytest.raises(GraphError):
        avg_shortest_path(simple_graph(1, np.zeros((0, 2))))


def test_pagerank_examples():
    pr = pagerank(simple_graph(2, [(0, 1)]))
    np.testing.assert_allclose(pr, [0.5, 0.5], atol=1e-12)
    g = random_graph(40, 90, 2)
    assert pagerank(g).sum() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_pagerank_matches_linear_solve(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 13))
    edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.3]
    g = simple_graph(n, edges if edges else [(0, 1)])
    np.testing.assert_allclose(pagerank(g), pagerank_linear_solve(g), atol=1e-8, rtol=0)


def test_jaccard_examples():
    # N(0) = {2,3,4}, N(1) = {3,4,5}
    g = simple_graph(6, [(0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (1, 5)])
    assert jaccard(g, 0, 1) == 0.5
    same = simple_graph(4, [(0, 2), (0, 3), (1, 2), (1, 3)])
    assert jaccard(same, 0, 1) == 1.0
    disjoint = simple_graph(4, [(0, 2), (1, 3)])
    assert jaccard(disjoint, 0, 1) == 0.0


def test_density_conductance_examples():
    g = complete(5)
    assert density(g, [0, 1, 2]) == 1.0
    two = simple_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5)])
    assert conductance(two, [0, 1, 2]) == 0.0
    cyc = simple_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert density(cyc, [0, 1]) == 1.0
    assert conductance(cyc, [0, 1]) == 0.5
    iso = simple_graph(3, [(1, 2)])
    assert conductance(iso, [0]) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_conductance_complement_symmetric(seed):
    g = random_graph(25, 50, seed)
    rng = np.random.default_rng(seed)
    s = rng.choice(25, 9, replace=False)
    rest = np.setdiff1d(np.arange(25), s)
    assert conductance(g, s) == conductance(g, rest)


def test_wl_isolated_node_one_hot():
    v = wl_hash(simple_graph(3, [(1, 2)]), [0], iterations=3)
    assert np.count_nonzero(v) <= 4 and v.sum() == pytest.approx(1.0)
    rounds = wl_labels(1, np.zeros((0, 2), dtype=np.int64), 3)
    assert rounds[0] == ["d0"] and len(rounds) == 4


def test_wl_triangle_vs_path():
    tri = simple_graph(3, [(0, 1), (1, 2), (0, 2)])
    path = simple_graph(3, [(0, 1), (1, 2)])
    # explicit relabeling: path has degrees {1,2,1}, triangle {2,2,2} -> differ from round 0
    assert wl_labels(3, tri.edges)[0] != sorted(wl_labels(3, path.edges)[0])
    assert not np.array_equal(wl_hash(tri, [0, 1, 2]), wl_hash(path, [0, 1, 2]))


@pytest.mark.parametrize("seed", range(5))
def test_wl_permutation_invariant(seed):
    g = random_graph(20, 45, seed)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(20)
    h = simple_graph(20, perm[g.edges])
    sub = rng.choice(20, 10, replace=False)
    np.testing.assert_array_equal(wl_hash(g, sub), wl_hash(h, perm[sub]))


def test_wl_empty_subset_errors():
    with pytest.raises(GraphError):
        wl_hash(complete(3), [])


def test_er_reference():
    assert graphs_equal(er_reference(4, 6, 0), complete(4))
    assert graphs_equal(er_reference(50, 100, 3), er_reference(50, 100, 3))
    assert er_reference(50, 100, 3).n_edges == 100
    with pytest.raises(GraphError):
        er_reference(4, 7, 0)


def test_er_clustering_expectation():
    n, m = 800, 7000
    p = m / (n * (n - 1) / 2)
    cs = np.array([avg_clustering(er_reference(n, m, s)) for s in range(20)])
    assert abs(cs.mean() - p) < 3 * cs.std(ddof=1)


def test_graph_invariants_rejected():
    f = np.zeros((3, 6))
    ok = dict(features=f, edges=np.array([[0, 1]]), edge_attrs=np.array([[1.0, 0.0]]),
              channel_present=np.array([[True, False]]), community=np.zeros(3, int),
              site=np.zeros(3, int), n_communities=1)
    MultiplexGraph(**ok)
    for bad in ({"edges": np.array([[1, 1]])}, {"edges": np.array([[1, 0]])},
                {"channel_present": np.array([[False, False]])},
                {"edge_attrs": np.array([[1.0, 0.5]])}):
        with pytest.raises(GraphError):
            MultiplexGraph(**{**ok, **bad})


def test_adjacency_symmetric_degree_sum():
    g = random_graph(40, 100, 1)
    a = g.adjacency
    assert (a != a.T).nnz == 0
    assert g.degrees.sum() == 2 * g.n_edges


def test_roundtrip_bit_exact(tmp_path):
    g = random_graph(30, 70, 4, attrs=True)
    path = save_graph(g, tmp_path / "g.json")
    assert graphs_equal(load_graph(path), g)


@pytest.mark.skipif("compiled" not in kernels.available_backends(), reason="extension not built")
@pytest.mark.parametrize("seed", range(3))
def test_backends_agree(seed):
    g = random_graph(60, 200, seed)
    indptr, indices = g.csr
    rng = np.random.default_rng(seed)
    us, vs = rng.integers(0, 60, 100), rng.integers(0, 60, 100)
    x, y = rng.standard_normal((40, 5)), rng.standard_normal((30, 5))
    outs = {}
    prev = kernels.BACKEND
    try:
        for b in ("compiled", "python"):
            kernels.use_backend(b)
            outs[b] = (kernels.bfs_distance_sums(indptr, indices, np.arange(60)),
                       kernels.triangle_counts(indptr, indices),
                       kernels.common_neighbor_counts(indptr, indices, us, vs),
                       kernels.rbf_block(x, y, (0.5, 1.0, 2.0)),
                       kernels.rbf_block(x, y, (0.7, 1.3)))
    finally:
        kernels.use_backend(prev)
    c, p = outs["compiled"], outs["python"]
    for a, b in zip(c[0], p[0]):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(c[1], p[1])
    np.testing.assert_array_equal(c[2], p[2])
    for k in (3, 4):
        assert c[k][0] == pytest.approx(p[k][0], rel=1e-12)
        np.testing.assert_allclose(c[k][1], p[k][1], rtol=1e-12, atol=1e-15)
