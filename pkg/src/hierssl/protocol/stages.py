"""The four protocol stages: tuning, single-graph probes, transfer, ablations.

Every model in every stage sees only the observed graph (the union graph
minus the held-out link test positives). Stage 1 runs with the task bundle
sealed, so any read of a test fold raises.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..evalprobe.linear import logistic
from ..evalprobe.probes import (
    ProbeResult,
    compare,
    cosine_link,
    jaccard_link,
    labelprop_node,
    logistic_node,
    probe_link,
    probe_node,
    probe_subgraph,
    ridge_pool,
    supervised_sage_link,
    supervised_sage_node,
    wl_hash_ridge,
)
from ..graphcore.graph import MultiplexGraph
from ..graphcore.metrics import avg_clustering
from ..sslmodel.config import VARIANTS, ModelConfig, tuning_grid, variant
from ..sslmodel.train import EmbeddingSet, TrainResult, embed, train
from ..sslmodel.model import init_params
from ..synthgen.config import GenConfig, substream
from ..synthgen.corpus import load_corpus_graph
from ..synthgen.generator import generate_graph
from ..synthgen.tasks import FoldLeakageError, TaskBundle, make_task_bundle, stratified_split

log = logging.getLogger(__name__)

TASKS = ("node", "link", "subgraph")
TASK_METRIC = {"node": "F1", "link": "AUC", "subgraph": "R2"}


class StageError(RuntimeError):
    def __init__(self, stage: str, msg: str):
        self.stage = stage
        super().__init__(f"{stage}: {msg}")


def pmap(fn, items, jobs: int = 1):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(min(jobs, len(items))) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- shared pieces -----------------------------------------------------------------

def observed_graph(g: MultiplexGraph, bundle: TaskBundle) -> MultiplexGraph:
    """The union graph restricted to train + val positives (reads no test fold)."""
    keep = g.edge_index(bundle.observed_pairs())
    if np.any(keep < 0):
        raise FoldLeakageError("bundle positives are not edges of the graph")
    mask = np.zeros(g.n_edges, dtype=bool)
    mask[keep] = True
    return g.edge_subset(mask)


@dataclass
class Reference:
    graph: MultiplexGraph
    observed: MultiplexGraph
    bundle: TaskBundle
    seed: int


def reference_graph(gen: GenConfig, seed: int) -> Reference:
    """First corpus instance: the graph generated from the run seed itself."""
    g = generate_graph(gen, seed)
    bundle = make_task_bundle(g, gen, seed)
    return Reference(graph=g, observed=observed_graph(g, bundle), bundle=bundle, seed=seed)


def ours_probes(emb: EmbeddingSet, bundle: TaskBundle, seed: int, fold: str) -> dict[str, ProbeResult]:
    """Frozen-embedding probes for the three tasks on ``fold``."""
    return {
        "node": probe_node(emb.z_v, bundle, seed, fold),
        "link": probe_link(emb.pair_embeddings, bundle, seed, fold),
        "subgraph": probe_subgraph(emb.edge_features(), emb.edges, bundle, seed, fold),
    }


def _params_digest(params: dict) -> str:
    import hashlib

    h = hashlib.sha256()
    for k in sorted(params):
        h.update(k.encode())
        h.update(np.ascontiguousarray(params[k]).tobytes())
    return h.hexdigest()


def _history_rows(history):
    return [{k: (int(v) if k == "epoch" else float(v)) for k, v in row.items()} for row in history]


# -- stage 1 -------------------------------------------------------------------------

def _stage1_one(args):
    idx, cfg, ref, seed, epochs = args
    ref.bundle.seal()
    reads = ref.bundle.test_reads
    result = train(ref.observed, cfg, seed, max_epochs=epochs)
    emb = embed(ref.observed, result.params, cfg)
    scores = {t: r.score for t, r in ours_probes(emb, ref.bundle, seed, "val").items()}
    if ref.bundle.test_reads != reads:
        raise FoldLeakageError("stage 1 touched a test fold")
    return {"index": idx, "config": cfg.to_dict(), "val": scores,
            "epochs": len(result.history), "best_epoch": result.best_epoch}


def composite_scores(rows: list[dict]) -> tuple[list[float], list[str]]:
    """Sum over tasks of min-max normalized validation scores; flat tasks contribute 0."""
    total = np.zeros(len(rows))
    degenerate = []
    for t in TASKS:
        v = np.array([r["val"][t] for r in rows], dtype=np.float64)
        lo, hi = v.min(), v.max()
        if hi <= lo:
            degenerate.append(t)
            log.warning("stage 1: task %s has max == min across configs; contributes 0", t)
            continue
        total += (v - lo) / (hi - lo)
    return total.tolist(), degenerate


def stage1_tune(ref: Reference, base: ModelConfig, seed: int, epochs: int | None = None,
                grid_limit: int | None = None, jobs: int = 1) -> dict:
    grid = tuning_grid(base)
    if grid_limit is not None:
        grid = grid[:grid_limit]
    ref.bundle.seal()
    rows = pmap(_stage1_one, [(i, cfg, ref, seed, epochs) for i, cfg in enumerate(grid)], jobs)
    comp, degenerate = composite_scores(rows)
    for r, c in zip(rows, comp):
        r["composite"] = c
    best = max(range(len(rows)), key=lambda i: (comp[i], -i))
    return {"stage": "tune", "seed": seed, "rows": rows, "winner_index": best,
            "winner": rows[best]["config"], "degenerate_tasks": degenerate}


# -- stage 2 -------------------------------------------------------------------------

METHOD_ORDER = {
    "link": ("Classical: Cosine", "Graph: Jaccard", "GNN: SAGE (sup.)", "Ours: LR(z_e)"),
    "node": ("Classical: LR", "Graph: LabelProp", "GNN: SAGE (sup.)", "Ours: MLP(z_n)"),
    "subgraph": ("Classical: Ridge(pool)", "Graph: WL-Hash", "Ours: Ridge(z_e)"),
}


def baseline_probes(ref: Reference, cfg: ModelConfig, seed: int) -> list[ProbeResult]:
    g, obs, b = ref.graph, ref.observed, ref.bundle
    return [
        cosine_link(obs, b, seed), jaccard_link(obs, b, seed),
        supervised_sage_link(obs, b, cfg.depth, cfg.hidden, seed),
        logistic_node(obs, b, seed), labelprop_node(obs, b, seed),
        supervised_sage_node(obs, b, cfg.depth, cfg.hidden, seed),
        ridge_pool(obs, b, seed), wl_hash_ridge(obs, b, seed),
    ]


def train_and_probe(ref: Reference, cfg: ModelConfig, seed: int, epochs: int | None = None):
    """Pre-train on the observed graph, freeze, and run the three test probes."""
    result = train(ref.observed, cfg, seed, max_epochs=epochs)
    digest = _params_digest(result.params)
    emb = embed(ref.observed, result.params, cfg)
    ours = ours_probes(emb, ref.bundle.unseal(), seed, "test")
    if _params_digest(result.params) != digest:
        raise StageError("probe", "model parameters changed during probing")
    return result, emb, ours


def _row(r: ProbeResult) -> dict:
    return {"task": r.task, "method": r.method, "metric": r.metric, "score": r.score}


def stage2_probe(ref: Reference, cfg: ModelConfig, seed: int, bootstrap_n: int = 2000,
                 alpha: float = 0.05, epochs: int | None = None) -> tuple[dict, TrainResult, EmbeddingSet]:
    result, emb, ours = train_and_probe(ref, cfg, seed, epochs)
    baselines = baseline_probes(ref, cfg, seed)
    by_task = {t: [r for r in baselines if r.task == t] + [ours[t]] for t in TASKS}
    rows, sig, pairwise = [], [], []
    for t in ("link", "node", "subgraph"):
        res = {r.method: r for r in by_task[t]}
        ordered = [res[m] for m in METHOD_ORDER[t]]
        best = max((r for r in ordered if not r.method.startswith("Ours")), key=lambda r: r.score)
        s = compare(ours[t], best, n=bootstrap_n, seed=seed)
        sig.append({"task": t, "ours": ours[t].method, "baseline": best.method, "diff": s.diff,
                    "ci_low": s.ci_low, "ci_high": s.ci_high, "p": s.p_value,
                    "n": s.n_resamples, "alpha": alpha})
        pairwise.append({"task": t, "baseline": best.method, "diff": s.diff, "p": s.p_value})
        for r in ordered:
            row = _row(r)
            if r.method.startswith("Ours"):
                row.update(ci_low=s.ci_low, ci_high=s.ci_high, p=s.p_value, vs=best.method)
            elif r is not best:
                o = compare(ours[t], r, n=bootstrap_n, seed=seed)
                pairwise.append({"task": t, "baseline": r.method, "diff": o.diff, "p": o.p_value})
            rows.append(row)
    report = {"stage": "probe", "seed": seed, "config": cfg.to_dict(), "rows": rows,
              "significance": sig, "pairwise": pairwise, "history": _history_rows(result.history),
              "best_epoch": result.best_epoch, "epochs": len(result.history)}
    return report, result, emb


# -- stage 3 -------------------------------------------------------------------------

def handcrafted_features(g: MultiplexGraph) -> np.ndarray:
    """Per-feature mean/std, per-channel edge mean/std, density, mean degree, clustering."""
    x = g.features
    parts = [x.mean(axis=0), x.std(axis=0)]
    for ch in range(2):
        vals = g.edge_attrs[g.channel_present[:, ch], ch]
        parts.append(np.array([vals.mean(), vals.std()]) if len(vals) else np.zeros(2))
    n = g.n_nodes
    parts.append(np.array([2.0 * g.n_edges / (n * (n - 1)), 2.0 * g.n_edges / n, avg_clustering(g)]))
    return np.concatenate(parts)


def _stage3_one(args):
    row, cfg, mode, epochs, shared_params, seed = args
    g, bundle = load_corpus_graph(row)
    obs = observed_graph(g, bundle)
    if mode == "shared":
        params = shared_params
    else:
        # every graph starts from the same run-seed initialization so that z_G
        # coordinates are comparable across graphs; augmentations use the graph seed
        init = init_params(cfg, seed, obs.features.shape[1])
        params = train(obs, cfg, int(row["seed"]), max_epochs=epochs, init=init).params
    z = embed(obs, params, cfg).z_g
    return {"seed": int(row["seed"]), "K": int(row["K"]), "z_g": z.tolist(),
            "handcrafted": handcrafted_features(obs).tolist()}


def confusion(true, pred, labels) -> list[list[int]]:
    idx = {k: i for i, k in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(true, pred):
        m[idx[int(t)], idx[int(p)]] += 1
    return m.tolist()


def stage3_transfer(rows: list[dict], cfg: ModelConfig, seed: int, mode: str = "per_graph",
                    epochs: int | None = None, shared_params: dict | None = None,
                    k_labels=(6, 7, 8, 9, 10), jobs: int = 1) -> dict:
    if mode == "shared" and shared_params is None:
        raise StageError("transfer", "shared mode needs pre-trained parameters")
    feats = pmap(_stage3_one, [(r, cfg, mode, epochs, shared_params, seed) for r in rows], jobs)
    y = np.array([f["K"] for f in feats])
    split = stratified_split(y, substream(seed, "transfer", "split"), fracs=(0.8, 0.0, 0.2))
    tr, te = split["train"], split["test"]
    if set(np.unique(y[tr])) != set(np.unique(y)):
        # a class too small for the 80/20 cut: move one member of each missing class to train
        for k in set(np.unique(y)) - set(np.unique(y[tr])):
            i = te[y[te] == k][0]
            tr, te = np.sort(np.append(tr, i)), te[te != i]
    out = {"stage": "transfer", "seed": seed, "mode": mode, "n_graphs": len(feats),
           "labels": list(k_labels), "train": tr.tolist(), "test": te.tolist(), "graphs": feats}
    for name, key in (("ours", "z_g"), ("baseline", "handcrafted")):
        x = np.array([f[key] for f in feats])
        model = logistic(x[tr], y[tr])
        pred = model.predict(x[te])
        out[name] = {"accuracy": float(np.mean(pred == y[te])),
                     "confusion": confusion(y[te], pred, k_labels),
                     "pred": pred.tolist()}
    counts = np.bincount(y[tr])
    out["majority_accuracy"] = float(np.mean(y[te] == np.argmax(counts)))
    return out


# -- stage 4 -------------------------------------------------------------------------

def _stage4_one(args):
    name, cfg, ref, seed, epochs = args
    result, _, ours = train_and_probe(ref, cfg, seed, epochs)
    return {"variant": name, "seed": seed, "scores": {t: ours[t].score for t in TASKS},
            "epochs": len(result.history),
            "mmd_max": max(abs(h["mmd"]) for h in result.history)}


def stage4_ablate(ref: Reference, winner: ModelConfig, seeds, epochs: int | None = None,
                  jobs: int = 1) -> dict:
    work = [(name, variant(winner, name), ref, s, epochs) for name in VARIANTS for s in seeds]
    runs = pmap(_stage4_one, work, jobs)
    grid = []
    for name in VARIANTS:
        mine = [r for r in runs if r["variant"] == name]
        grid.append({"variant": name,
                     **{t: float(np.median([r["scores"][t] for r in mine])) for t in TASKS}})
    return {"stage": "ablate", "seeds": list(seeds), "runs": runs, "grid": grid}
