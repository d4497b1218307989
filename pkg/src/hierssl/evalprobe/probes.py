"""Frozen-embedding probes and the classical / graph / supervised baselines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..graphcore.graph import MultiplexGraph
from ..graphcore.metrics import jaccard_pairs, wl_hash
from ..numcore import tape as T
from ..numcore.optim import AdamState, adam_step, clip_global_norm
from ..synthgen.config import substream
from ..synthgen.tasks import FoldLeakageError, TaskBundle
from .bootstrap import SignificanceResult, paired_bootstrap
from .linear import Standardizer, logistic, ridge
from .metrics import METRICS, auc, macro_f1, r2


@dataclass
class ProbeResult:
    task: str               # "link" | "node" | "subgraph"
    method: str
    metric: str             # "AUC" | "F1" | "R2"
    score: float
    truth: np.ndarray
    pred: np.ndarray        # scores (AUC), class ids (F1) or predictions (R2), one per test item
    seed: int = 0
    fold: str = "test"
    extra: dict = field(default_factory=dict)


def _result(task, method, metric, truth, pred, seed, fold, **extra) -> ProbeResult:
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if metric == "AUC":
        score = auc(pred, truth)
    elif metric == "F1":
        score = macro_f1(pred, truth, n_classes=3)
    else:
        score = r2(pred, truth)
    return ProbeResult(task, method, metric, float(score), truth, pred, seed, fold, dict(extra))


def compare(a: ProbeResult, b: ProbeResult, n: int = 2000, seed: int = 0) -> SignificanceResult:
    """Paired bootstrap of score(a) - score(b) over the shared test items."""
    if a.metric != b.metric or not np.array_equal(a.truth, b.truth):
        raise ValueError("results are not paired on the same items")
    fn = METRICS[a.metric]

    def metric(items, idx):
        if a.metric == "F1":
            return macro_f1(items[idx, 1], items[idx, 0], n_classes=3)
        return fn(items[idx, 1], items[idx, 0])

    ia = np.column_stack([a.truth, a.pred]).astype(np.float64)
    ib = np.column_stack([b.truth, b.pred]).astype(np.float64)
    return paired_bootstrap(ia, ib, n=n, rng=substream(seed, "bootstrap", a.task, a.method, b.method),
                            metric=metric)


# -- small taped classifiers -------------------------------------------------------

def _cross_entropy(logits, y: np.ndarray, n_classes: int):
    onehot = np.zeros((len(y), n_classes))
    onehot[np.arange(len(y)), y] = 1.0
    lp = T.log_softmax_rows(logits)
    return T.scale(T.total(lp * onehot), -1.0 / len(y))


def _fit_early_stopping(params, loss_fn, val_score_fn, lr, max_epochs, patience):
    """Full-batch Adam; keeps the params with the best validation score (strict improvement)."""
    state = AdamState.for_params(params, lr=lr, weight_decay=0.0)
    best_score, best, wait, epochs = -np.inf, params, 0, 0
    for epoch in range(1, max_epochs + 1):
        epochs = epoch
        tape = T.Tape()
        v = tape.params(params)
        loss = loss_fn(tape, v)
        grads = clip_global_norm(T.backward(tape, loss), 5.0)
        tape.release()
        params = adam_step(params, grads, state)
        score = val_score_fn(params)
        if score > best_score:
            best_score, best, wait = score, params, 0
        else:
            wait += 1
            if wait >= patience:
                break
    return best, best_score, epochs


def _init(rng, fan_in, shape):
    b = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-b, b, size=shape)


def mlp_classifier(x_tr, y_tr, x_va, y_va, seed: int, hidden: int = 128, n_classes: int = 3,
                   lr: float = 1e-2, max_epochs: int = 1000, patience: int = 10):
    """1-hidden-layer ReLU MLP, early stopping on validation macro-F1. Returns predict(x)."""
    if set(np.unique(y_tr)) != set(range(n_classes)):
        raise ValueError("a class is missing from the training fold")
    sc = Standardizer.fit(x_tr)
    xt, xv = sc(x_tr), sc(x_va)
    rng = substream(seed, "probe", "mlp")
    d = xt.shape[1]
    params = {"w1": _init(rng, d, (d, hidden)), "b1": np.zeros((1, hidden)),
              "w2": _init(rng, hidden, (hidden, n_classes)), "b2": np.zeros((1, n_classes))}

    def logits_np(p, x):
        return np.maximum(x @ p["w1"] + p["b1"], 0.0) @ p["w2"] + p["b2"]

    def loss_fn(tape, v):
        h = T.relu(tape.const(xt) @ v["w1"] + v["b1"])
        return _cross_entropy(h @ v["w2"] + v["b2"], y_tr, n_classes)

    best, _, _ = _fit_early_stopping(
        params, loss_fn, lambda p: macro_f1(np.argmax(logits_np(p, xv), 1), y_va, n_classes),
        lr, max_epochs, patience)
    return lambda x: np.argmax(logits_np(best, sc(x)), axis=1)


# -- leakage guard ---------------------------------------------------------------

def assert_disjoint(*pair_sets: np.ndarray, n: int) -> None:
    seen: set[int] = set()
    for arr in pair_sets:
        arr = np.asarray(arr, dtype=np.int64).reshape(-1, 2)
        keys = set((np.minimum(arr[:, 0], arr[:, 1]) * n + np.maximum(arr[:, 0], arr[:, 1])).tolist())
        if len(keys) != len(arr) or seen & keys:
            raise FoldLeakageError("a node pair appears in more than one fold")
        seen |= keys


# -- node classification -----------------------------------------------------------

def probe_node(z_v: np.ndarray, bundle: TaskBundle, seed: int = 0, fold: str = "test",
               method: str = "Ours: MLP(z_n)") -> ProbeResult:
    tr, va = bundle.node_train, bundle.node_val
    y = bundle.node_label
    ev = bundle.node_fold(fold)
    predict = mlp_classifier(z_v[tr], y[tr], z_v[va], y[va], seed)
    return _result("node", method, "F1", y[ev], predict(z_v[ev]), seed, fold)


def logistic_node(g: MultiplexGraph, bundle: TaskBundle, seed: int = 0, fold: str = "test") -> ProbeResult:
    tr = bundle.node_train
    ev = bundle.node_fold(fold)
    y = bundle.node_label
    model = logistic(g.features[tr], y[tr])
    return _result("node", "Classical: LR", "F1", y[ev], model.predict(g.features[ev]), seed, fold)


def label_propagation(g: MultiplexGraph, seed_nodes: np.ndarray, seed_labels: np.ndarray,
                      n_classes: int = 3, iters: int = 50) -> np.ndarray:
    """Diffuse one-hot seeds over the row-normalized union adjacency, clamping seeds each step."""
    a = g.adjacency
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg, dtype=np.float64), where=deg > 0)
    p = a.multiply(inv[:, None]).tocsr()
    seeds = np.zeros((g.n_nodes, n_classes))
    seeds[seed_nodes, seed_labels] = 1.0
    f = seeds.copy()
    for _ in range(iters):
        f = p @ f
        f[seed_nodes] = seeds[seed_nodes]
    return np.argmax(f, axis=1)


def labelprop_node(g: MultiplexGraph, bundle: TaskBundle, seed: int = 0, fold: str = "test") -> ProbeResult:
    tr = bundle.node_train
    ev = bundle.node_fold(fold)
    y = bundle.node_label
    pred = label_propagation(g, tr, y[tr])
    return _result("node", "Graph: LabelProp", "F1", y[ev], pred[ev], seed, fold)


# -- supervised GraphSAGE references -----------------------------------------------

def _sage_params(depth, hidden, d_in, rng):
    p = {}
    for layer in range(depth):
        p[f"sage.{layer}.ws"] = _init(rng, d_in, (d_in, hidden))
        p[f"sage.{layer}.wn"] = _init(rng, d_in, (d_in, hidden))
        d_in = hidden
    return p


def _sage_forward(v, x, op, depth):
    h = x
    for layer in range(depth):
        h = T.relu(h @ v[f"sage.{layer}.ws"] + T.spmm(op, h) @ v[f"sage.{layer}.wn"])
    return h


def _sage_numpy(p, x, op, depth):
    h = x
    for layer in range(depth):
        h = np.maximum(h @ p[f"sage.{layer}.ws"] + (op @ h) @ p[f"sage.{layer}.wn"], 0.0)
    return h


def supervised_sage_node(g: MultiplexGraph, bundle: TaskBundle, depth: int = 2, hidden: int = 64,
                         seed: int = 0, fold: str = "test", lr: float = 1e-2,
                         max_epochs: int = 500, patience: int = 10) -> ProbeResult:
    from ..sslmodel.model import mean_operator, standardize_features

    x = standardize_features(g.features)
    op = mean_operator(g.edges, g.n_nodes)
    y = bundle.node_label
    tr, va = bundle.node_train, bundle.node_val
    rng = substream(seed, "sup_sage", "node")
    params = _sage_params(depth, hidden, x.shape[1], rng)
    params["cls.w"] = _init(rng, hidden, (hidden, 3))
    params["cls.b"] = np.zeros((1, 3))

    def loss_fn(tape, v):
        h = _sage_forward(v, tape.const(x), op, depth)
        logits = T.gather_rows(h, tr) @ v["cls.w"] + v["cls.b"]
        return _cross_entropy(logits, y[tr], 3)

    def predict(p, idx):
        h = _sage_numpy(p, x, op, depth)
        return np.argmax(h[idx] @ p["cls.w"] + p["cls.b"], axis=1)

    best, _, _ = _fit_early_stopping(params, loss_fn, lambda p: macro_f1(predict(p, va), y[va], 3),
                                     lr, max_epochs, patience)
    ev = bundle.node_fold(fold)
    return _result("node", "GNN: SAGE (sup.)", "F1", y[ev], predict(best, ev), seed, fold)


def supervised_sage_link(g_obs: MultiplexGraph, bundle: TaskBundle, depth: int = 2, hidden: int = 64,
                         seed: int = 0, fold: str = "test", lr: float = 1e-2,
                         max_epochs: int = 500, patience: int = 10) -> ProbeResult:
    """Backbone + dot-product decoder (plus a scalar bias), binary cross-entropy on train pairs."""
    from ..sslmodel.model import mean_operator, standardize_features

    x = standardize_features(g_obs.features)
    op = mean_operator(g_obs.edges, g_obs.n_nodes)
    tr_pairs, tr_y = bundle.link_fold("train")
    va_pairs, va_y = bundle.link_fold("val")
    rng = substream(seed, "sup_sage", "link")
    params = _sage_params(depth, hidden, x.shape[1], rng)
    params["dec.b"] = np.zeros((1, 1))
    sign = np.where(tr_y == 1, 1.0, 0.0)

    def loss_fn(tape, v):
        h = _sage_forward(v, tape.const(x), op, depth)
        s = T.row_sum(T.gather_rows(h, tr_pairs[:, 0]) * T.gather_rows(h, tr_pairs[:, 1])) + v["dec.b"]
        logits = T.concat_cols([tape.const(np.zeros((len(tr_y), 1))), s])
        onehot = np.column_stack([1.0 - sign, sign])
        return T.scale(T.total(T.log_softmax_rows(logits) * onehot), -1.0 / len(tr_y))

    def scores(p, pairs):
        h = _sage_numpy(p, x, op, depth)
        return np.sum(h[pairs[:, 0]] * h[pairs[:, 1]], axis=1) + p["dec.b"][0, 0]

    best, _, _ = _fit_early_stopping(params, loss_fn, lambda p: auc(scores(p, va_pairs), va_y),
                                     lr, max_epochs, patience)
    ev_pairs, ev_y = bundle.link_fold(fold)
    return _result("link", "GNN: SAGE (sup.)", "AUC", ev_y, scores(best, ev_pairs), seed, fold)


# -- link prediction -------------------------------------------------------------

def probe_link(pair_embed, bundle: TaskBundle, seed: int = 0, fold: str = "test",
               method: str = "Ours: LR(z_e)") -> ProbeResult:
    """Logistic probe on zero-attribute pair embeddings, fitted on the train fold.

    ``pair_embed(pairs) -> (P, D)`` is the frozen on-the-fly edge embedder.
    """
    tr_pairs, tr_y = bundle.link_fold("train")
    ev_pairs, ev_y = bundle.link_fold(fold)
    if fold == "test":
        va_pairs, _ = bundle.link_fold("val")
        assert_disjoint(tr_pairs, va_pairs, ev_pairs, n=bundle.n_nodes)
    else:
        assert_disjoint(tr_pairs, ev_pairs, n=bundle.n_nodes)
    model = logistic(pair_embed(tr_pairs), tr_y)
    return _result("link", method, "AUC", ev_y, model.decision(pair_embed(ev_pairs)), seed, fold)


def cosine_link(g: MultiplexGraph, bundle: TaskBundle, seed: int = 0, fold: str = "test") -> ProbeResult:
    pairs, y = bundle.link_fold(fold)
    x = g.features
    a, b = x[pairs[:, 0]], x[pairs[:, 1]]
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    denom = na * nb
    s = np.divide(np.sum(a * b, axis=1), denom, out=np.zeros(len(pairs)), where=denom > 0)
    return _result("link", "Classical: Cosine", "AUC", y, s, seed, fold)


def jaccard_link(g_obs: MultiplexGraph, bundle: TaskBundle, seed: int = 0, fold: str = "test") -> ProbeResult:
    """Jaccard on the observed graph; the evaluated positives must be absent from it."""
    pairs, y = bundle.link_fold(fold)
    pos = pairs[y == 1]
    if len(pos) and np.any(g_obs.edge_index(pos) >= 0):
        raise FoldLeakageError("evaluated positive edges are present in the observed graph")
    return _result("link", "Graph: Jaccard", "AUC", y, jaccard_pairs(g_obs, pairs), seed, fold)


# -- subgraph regression -----------------------------------------------------------

def pool_edges(edge_feats: np.ndarray, edges: np.ndarray, n: int, subsets) -> np.ndarray:
    """Mean of edge features over each subset's internal edges (zero vector if none)."""
    inside = np.zeros(n, dtype=bool)
    out = np.zeros((len(subsets), edge_feats.shape[1]))
    for i, s in enumerate(subsets):
        inside[:] = False
        inside[s] = True
        m = inside[edges[:, 0]] & inside[edges[:, 1]]
        if m.any():
            out[i] = edge_feats[m].mean(axis=0)
    return out


def _ridge_result(feats, bundle, method, seed, fold):
    tr = bundle.sub_train
    ev = bundle.sub_fold(fold)
    y = bundle.sub_target
    model = ridge(feats[tr], y[tr])
    return _result("subgraph", method, "R2", y[ev], model.predict(feats[ev]), seed, fold)


def probe_subgraph(edge_feats: np.ndarray, edges: np.ndarray, bundle: TaskBundle, seed: int = 0,
                   fold: str = "test", method: str = "Ours: Ridge(z_e)") -> ProbeResult:
    feats = pool_edges(edge_feats, edges, bundle.n_nodes, bundle.subgraphs)
    return _ridge_result(feats, bundle, method, seed, fold)


def ridge_pool(g: MultiplexGraph, bundle: TaskBundle, seed: int = 0, fold: str = "test") -> ProbeResult:
    feats = np.stack([g.features[s].mean(axis=0) for s in bundle.subgraphs])
    return _ridge_result(feats, bundle, "Classical: Ridge(pool)", seed, fold)


def wl_hash_ridge(g: MultiplexGraph, bundle: TaskBundle, seed: int = 0, fold: str = "test") -> ProbeResult:
    feats = np.stack([wl_hash(g, s) for s in bundle.subgraphs])
    return _ridge_result(feats, bundle, "Graph: WL-Hash", seed, fold)


__all__ = [
    "ProbeResult", "compare", "probe_node", "logistic_node", "label_propagation", "labelprop_node",
    "supervised_sage_node", "supervised_sage_link", "probe_link", "cosine_link", "jaccard_link",
    "probe_subgraph", "ridge_pool", "wl_hash_ridge", "pool_edges", "mlp_classifier", "assert_disjoint",
]
