import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import log_softmax

from hierssl.evalprobe import (
    assert_disjoint,
    auc,
    auc_pairwise,
    compare,
    cosine_link,
    jaccard_link,
    label_propagation,
    labelprop_node,
    logistic,
    logistic_node,
    macro_f1,
    mlp_classifier,
    paired_bootstrap,
    pool_edges,
    probe_link,
    probe_node,
    probe_subgraph,
    r2,
    ridge,
    ridge_pool,
    supervised_sage_link,
    supervised_sage_node,
    wl_hash_ridge,
)
from hierssl.evalprobe.linear import logistic_loss
from hierssl.graphcore import simple_graph
from hierssl.synthgen import FoldLeakageError

# -- metrics -------------------------------------------------------------------------


def _auc_loop(s, y):
    num = 0.0
    pos = [a for a, t in zip(s, y) if t]
    neg = [b for b, t in zip(s, y) if not t]
    for a in pos:
        for b in neg:
            num += 1.0 if a > b else 0.5 if a == b else 0.0
    return num / (len(pos) * len(neg))


@pytest.mark.parametrize("seed", range(50))
def test_auc_matches_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    s = rng.integers(0, 6, n).astype(float) if seed % 2 else rng.standard_normal(n)
    assert auc(s, y) == pytest.approx(_auc_loop(s, y), abs=1e-12)
    assert auc(s, y) == pytest.approx(auc_pairwise(s, y), abs=1e-12)


def test_auc_examples():
    y = np.array([0, 1, 0, 1, 1])
    assert auc(y.astype(float), y) == 1.0
    assert auc(np.zeros(5), y) == 0.5
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


def test_auc_random_scores_near_half():
    vals = [auc(np.random.default_rng(s).random(400), np.repeat([0, 1], 200)) for s in range(10)]
    assert abs(np.mean(vals) - 0.5) < 0.05


def test_macro_f1_hand_example():
    true = np.array([0, 0, 1, 1, 2, 2])
    pred = np.array([0, 1, 1, 1, 2, 0])
    # class 0: tp1 fp1 fn1 -> 0.5; class 1: tp2 fp1 fn0 -> 0.8; class 2: tp1 fp0 fn1 -> 2/3
    assert macro_f1(pred, true) == pytest.approx((0.5 + 0.8 + 2 / 3) / 3)
    assert macro_f1(true, true, n_classes=3) == 1.0


def test_r2_examples():
    y = np.array([1.0, 2.0, 4.0, 7.0])
    assert r2(y, y) == 1.0
    assert r2(np.full(4, y.mean()), y) == pytest.approx(0.0)
    assert r2(np.full(4, 100.0), y) < 0


# -- linear models -------------------------------------------------------------------------

def test_ridge_hand_dataset_matches_normal_equations():
    x = np.array([[1.0, 2.0], [2.0, 0.5], [3.0, 1.0], [4.0, 3.0], [5.0, 2.5]])
    y = np.array([1.0, 2.5, 2.0, 5.0, 4.5])
    lam = 1.0
    # augmented normal equations with an unpenalized intercept
    xa = np.hstack([x, np.ones((5, 1))])
    pen = np.diag([lam, lam, 0.0])
    theta = np.linalg.solve(xa.T @ xa + pen, xa.T @ y)
    m = ridge(x, y, lam=lam, standardize=False)
    np.testing.assert_allclose(m.w, theta[:2], atol=1e-10)
    assert m.b == pytest.approx(theta[2], abs=1e-10)


def test_ridge_noiseless_recovery():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 4))
    w = np.array([1.0, -2.0, 0.5, 3.0])
    m = ridge(x, x @ w + 0.7, lam=1e-12, standardize=False)
    np.testing.assert_allclose(m.w, w, atol=1e-6)
    assert m.b == pytest.approx(0.7, abs=1e-6)


def test_ridge_singular_design_is_solved():
    x = np.ones((6, 3))
    m = ridge(x, np.arange(6.0), lam=1.0)
    assert np.all(np.isfinite(m.predict(x)))


def test_logistic_separable():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(-3, 1, (40, 2)), rng.normal(3, 1, (40, 2))])
    y = np.repeat([0, 1], 40)
    m = logistic(x, y)
    assert np.mean(m.predict(x) == y) == 1.0


def test_logistic_reaches_optimum():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((120, 3))
    y = (x @ [1.0, -1.0, 0.5] + rng.normal(0, 1.0, 120) > 0).astype(int) + (x[:, 0] > 1)
    m = logistic(x, y)
    assert m.grad_norm < 1e-6 or m.iterations == 5000
    # independent optimizer on the same objective
    xs = m.scaler(x)
    k = len(m.classes)
    onehot = (y[:, None] == m.classes[None, :]).astype(float)

    def obj(th):
        w = th[: 3 * k].reshape(3, k)
        b = th[3 * k:]
        return -(log_softmax(xs @ w + b, axis=1) * onehot).sum(1).mean() + (w ** 2).sum() / (2 * len(x))
    res = minimize(obj, np.zeros(4 * k), method="BFGS", options={"gtol": 1e-10})
    assert logistic_loss(m, x, y) == pytest.approx(res.fun, abs=1e-9)


# -- bootstrap --------------------------------------------------------------------------

def test_bootstrap_identical():
    a = np.random.default_rng(0).random(100)
    r = paired_bootstrap(a, a)
    assert (r.ci_low, r.ci_high, r.p_value, r.diff) == (0.0, 0.0, 1.0, 0.0)
    assert r.n_resamples == 2000


def test_bootstrap_dominance():
    rng = np.random.default_rng(1)
    b = rng.random(80)
    r = paired_bootstrap(b + 0.1 + rng.random(80), b, n=2000)
    assert r.ci_low > 0 and r.p_value == 1 / 2000 and r.significant


def test_bootstrap_ci_contains_estimate_and_length_check():
    rng = np.random.default_rng(2)
    for seed in range(20):
        a, b = rng.random(15), rng.random(15)
        r = paired_bootstrap(a, b, n=200, rng=np.random.default_rng(seed))
        assert r.ci_low <= r.diff <= r.ci_high and 0 <= r.p_value <= 1
    with pytest.raises(ValueError):
        paired_bootstrap(np.ones(3), np.ones(4))


def test_bootstrap_deterministic_under_seed():
    rng = np.random.default_rng(3)
    a, b = rng.random(50), rng.random(50)
    r1 = paired_bootstrap(a, b, rng=np.random.default_rng(9))
    r2_ = paired_bootstrap(a, b, rng=np.random.default_rng(9))
    assert r1 == r2_


# -- label propagation ---------------------------------------------------------------

def _two_cliques():
    edges = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    edges += [(i, j) for i in range(5, 10) for j in range(i + 1, 10)]
    return simple_graph(10, edges)


def test_label_propagation_two_cliques():
    g = _two_cliques()
    pred = label_propagation(g, np.array([0, 7]), np.array([1, 2]))
    truth = np.array([1] * 5 + [2] * 5)
    assert np.array_equal(pred, truth)
    assert macro_f1(pred, truth) == 1.0


def test_label_propagation_clamps_all_seeds():
    g = _two_cliques()
    labels = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2, 0])
    assert np.array_equal(label_propagation(g, np.arange(10), labels), labels)


def test_label_propagation_unreached_ties_to_class_zero():
    g = simple_graph(4, [(0, 1)])
    assert np.array_equal(label_propagation(g, np.array([0]), np.array([2])), [2, 2, 0, 0])


# -- MLP probe ---------------------------------------------------------------------------

def test_mlp_shuffled_labels_chance():
    scores = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((900, 16))
        y = rng.permutation(np.repeat([0, 1, 2], 300))
        predict = mlp_classifier(x[:500], y[:500], x[500:700], y[500:700], seed)
        scores.append(macro_f1(predict(x[700:]), y[700:], 3))
    assert abs(np.mean(scores) - 1 / 3) < 0.1


def test_mlp_missing_class_raises():
    x = np.zeros((6, 2))
    with pytest.raises(ValueError):
        mlp_classifier(x, np.array([0, 1, 0, 1, 0, 1]), x, np.zeros(6, int), 0)


# -- probes on a small generated graph ---------------------------------------------------

def test_probe_node_separable(small_ref):
    b = small_ref.bundle.unseal()
    z = np.random.default_rng(0).standard_normal((b.n_nodes, 8)) * 0.01
    z[:, 0] = b.node_label * 3.0
    assert probe_node(z, b).score == 1.0


def test_probe_link_perfect_and_random(small_ref):
    b = small_ref.bundle.unseal()
    n = b.n_nodes
    key = np.zeros((n, n))
    for fold in ("train", "val", "test"):
        pairs, y = b.link_fold(fold)
        key[pairs[:, 0], pairs[:, 1]] = key[pairs[:, 1], pairs[:, 0]] = y * 2.0 - 1.0

    def oracle(pairs):
        return key[pairs[:, 0], pairs[:, 1]][:, None]
    assert probe_link(oracle, b).score == 1.0

    rand = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        rand.append(probe_link(lambda p: rng.standard_normal((len(p), 4)), b).score)
    assert abs(np.mean(rand) - 0.5) < 0.05


def test_probe_subgraph_linear_target(small_ref):
    b = small_ref.bundle.unseal()
    g = small_ref.graph
    feats = np.random.default_rng(1).standard_normal((g.n_edges, 5))
    pooled = pool_edges(feats, g.edges, g.n_nodes, b.subgraphs)
    saved = b.sub_target
    try:
        b.sub_target = pooled @ np.array([1.0, 2.0, -1.0, 0.5, 0.0])
        assert probe_subgraph(feats, g.edges, b).score > 0.99
    finally:
        b.sub_target = saved


def test_pool_edges_zero_vector_when_no_internal_edge():
    g = simple_graph(4, [(0, 1), (2, 3)])
    out = pool_edges(np.array([[1.0, 2.0], [3.0, 4.0]]), g.edges, 4, [np.array([0, 2]), np.array([0, 1])])
    np.testing.assert_array_equal(out, [[0.0, 0.0], [1.0, 2.0]])


def test_baselines_run_and_report_ranges(small_ref):
    g, obs, b = small_ref.graph, small_ref.observed, small_ref.bundle.unseal()
    results = [logistic_node(g, b), labelprop_node(obs, b), cosine_link(g, b), jaccard_link(obs, b),
               ridge_pool(g, b), wl_hash_ridge(obs, b),
               supervised_sage_node(obs, b, max_epochs=30), supervised_sage_link(obs, b, max_epochs=30)]
    for r in results:
        assert len(r.truth) == len(r.pred)
        if r.metric in ("AUC", "F1"):
            assert 0.0 <= r.score <= 1.0
        else:
            assert r.score <= 1.0
    link = [r for r in results if r.task == "link"]
    assert np.array_equal(link[0].truth, link[1].truth)
    s = compare(link[0], link[1], n=200)
    assert s.ci_low <= s.diff <= s.ci_high
    with pytest.raises(ValueError):
        compare(results[0], results[2])


def test_jaccard_rejects_unmasked_graph(small_ref):
    b = small_ref.bundle.unseal()
    with pytest.raises(FoldLeakageError):
        jaccard_link(small_ref.graph, b)


def test_fold_leakage_detected():
    a = np.array([[0, 1], [2, 3]])
    assert_disjoint(a, np.array([[1, 2]]), n=5)
    with pytest.raises(FoldLeakageError):
        assert_disjoint(a, np.array([[1, 0]]), n=5)
    with pytest.raises(FoldLeakageError):
        assert_disjoint(np.array([[0, 1], [1, 0]]), n=5)


def test_macro_f1_one_class_prediction_bound():
    true = np.repeat([0, 1, 2], [5, 9, 4])
    for c in range(3):
        assert macro_f1(np.full(len(true), c), true, n_classes=3) <= 1 / 3


def test_bootstrap_metric_is_recomputed_per_resample():
    # AUC is not a mean of per-item terms; a custom metric must see whole resamples
    truth = np.repeat([0, 1], 30)
    a = np.column_stack([truth, truth + np.random.default_rng(0).normal(0, 0.1, 60)])
    b = np.column_stack([truth, np.random.default_rng(1).random(60)])

    def metric(items, idx):
        t = items[idx, 0]
        return auc(items[idx, 1], t) if 0 < t.sum() < len(t) else 0.5
    r = paired_bootstrap(a, b, n=300, metric=metric)
    assert r.diff == pytest.approx(auc(a[:, 1], truth) - auc(b[:, 1], truth))
