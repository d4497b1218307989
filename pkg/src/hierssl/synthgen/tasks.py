"""Downstream labels and folds: node tertile classes, link folds with negatives, subgraph targets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..graphcore.graph import MultiplexGraph
from ..graphcore.metrics import conductance, density, pagerank
from .config import GenConfig, substream


class FoldLeakageError(RuntimeError):
    """A test fold was read while sealed, or two folds share an item."""


def minmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def node_scores(g: MultiplexGraph) -> np.ndarray:
    """0.5*minmax(PageRank) + 0.5*minmax(mean of the four standardized neuro features)."""
    x = g.features[:, :4]
    sd = x.std(axis=0)
    z = (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    return 0.5 * minmax(pagerank(g)) + 0.5 * minmax(z.mean(axis=1))


def tertile_labels(score: np.ndarray) -> np.ndarray:
    """Three equal-count classes by ascending score; ties go to the lower node id first."""
    n = len(score)
    order = np.lexsort((np.arange(n), score))
    labels = np.empty(n, dtype=np.int64)
    labels[order] = (np.arange(n) * 3) // n
    return labels


def stratified_split(strata: np.ndarray, rng: np.random.Generator,
                     fracs=(0.70, 0.15, 0.15)) -> dict[str, np.ndarray]:
    """Per-stratum shuffle; round(frac*n_c) to train and val, the rest to test."""
    out = {"train": [], "val": [], "test": []}
    for c in np.unique(strata):
        members = rng.permutation(np.flatnonzero(strata == c))
        n_tr = int(round(fracs[0] * len(members)))
        n_va = int(round(fracs[1] * len(members)))
        out["train"].append(members[:n_tr])
        out["val"].append(members[n_tr:n_tr + n_va])
        out["test"].append(members[n_tr + n_va:])
    return {k: np.sort(np.concatenate(v)).astype(np.int64) for k, v in out.items()}


def sample_negatives(n: int, count: int, forbidden: set[int], rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct non-edges u<v drawn uniformly; keys u*n+v in ``forbidden`` are rejected.

    Accepted keys are added to ``forbidden`` so successive calls stay disjoint.
    """
    out = []
    while len(out) < count:
        need = count - len(out)
        u = rng.integers(0, n, size=2 * need + 16)
        v = rng.integers(0, n, size=2 * need + 16)
        for a, b in zip(u.tolist(), v.tolist()):
            if a == b:
                continue
            if a > b:
                a, b = b, a
            key = a * n + b
            if key in forbidden:
                continue
            forbidden.add(key)
            out.append((a, b))
            if len(out) == count:
                break
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def random_walk_subset(g: MultiplexGraph, size: int, rng: np.random.Generator,
                       max_steps_factor: int = 50) -> np.ndarray:
    """Nodes visited by a simple random walk until ``size`` distinct nodes are seen.

    A walk that stalls (small component, step budget spent) restarts from a new seed node.
    """
    indptr, indices = g.csr
    n = g.n_nodes
    if size > n:
        raise ValueError("subset larger than graph")
    while True:
        v = int(rng.integers(n))
        seen = {v}
        steps = 0
        while len(seen) < size and steps < max_steps_factor * size:
            lo, hi = indptr[v], indptr[v + 1]
            if hi == lo:
                break
            v = int(indices[lo + rng.integers(hi - lo)])
            seen.add(v)
            steps += 1
        if len(seen) == size:
            return np.array(sorted(seen), dtype=np.int64)


_TEST_FIELDS = ("node_test", "link_test_pos", "link_test_neg", "sub_test")


@dataclass(eq=False)
class TaskBundle:
    node_score: np.ndarray
    node_label: np.ndarray
    node_train: np.ndarray
    node_val: np.ndarray
    _node_test: np.ndarray
    link_train_pos: np.ndarray
    link_train_neg: np.ndarray
    link_val_pos: np.ndarray
    link_val_neg: np.ndarray
    _link_test_pos: np.ndarray
    _link_test_neg: np.ndarray
    subgraphs: list
    sub_density: np.ndarray
    sub_conductance: np.ndarray
    sub_target: np.ndarray
    sub_train: np.ndarray
    sub_val: np.ndarray
    _sub_test: np.ndarray
    sealed: bool = field(default=False)
    test_reads: int = field(default=0)

    # test folds go through a guard so protocol stages can prove they never peeked
    def _test(self, name):
        if self.sealed:
            raise FoldLeakageError(f"test fold {name!r} read while sealed")
        self.test_reads += 1
        return getattr(self, "_" + name)

    node_test = property(lambda self: self._test("node_test"))
    link_test_pos = property(lambda self: self._test("link_test_pos"))
    link_test_neg = property(lambda self: self._test("link_test_neg"))
    sub_test = property(lambda self: self._test("sub_test"))

    def seal(self) -> "TaskBundle":
        self.sealed = True
        return self

    def unseal(self) -> "TaskBundle":
        self.sealed = False
        return self

    @property
    def n_nodes(self) -> int:
        return len(self.node_label)

    def link_fold(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(pairs, labels) for fold 'train', 'val' or 'test'; positives first."""
        if name == "test":
            pos, neg = self.link_test_pos, self.link_test_neg
        else:
            pos, neg = getattr(self, f"link_{name}_pos"), getattr(self, f"link_{name}_neg")
        pairs = np.concatenate([pos, neg]).reshape(-1, 2)
        y = np.concatenate([np.ones(len(pos), np.int64), np.zeros(len(neg), np.int64)])
        return pairs, y

    def node_fold(self, name: str) -> np.ndarray:
        return self.node_test if name == "test" else getattr(self, f"node_{name}")

    def sub_fold(self, name: str) -> np.ndarray:
        return self.sub_test if name == "test" else getattr(self, f"sub_{name}")

    def check_disjoint(self) -> None:
        """Raise FoldLeakageError when any pair or item sits in two folds."""
        n = self.n_nodes
        seen: dict[int, str] = {}
        for name in ("link_train_pos", "link_train_neg", "link_val_pos", "link_val_neg",
                     "_link_test_pos", "_link_test_neg"):
            arr = getattr(self, name)
            for key in (arr[:, 0] * n + arr[:, 1]).tolist():
                if key in seen:
                    raise FoldLeakageError(f"pair {divmod(key, n)} in {seen[key]} and {name.lstrip('_')}")
                seen[key] = name.lstrip("_")
        for prefix in ("node", "sub"):
            parts = [getattr(self, f"{prefix}_train"), getattr(self, f"{prefix}_val"),
                     getattr(self, f"_{prefix}_test")]
            allv = np.concatenate(parts)
            if len(np.unique(allv)) != len(allv):
                raise FoldLeakageError(f"{prefix} split folds overlap")

    def observed_pairs(self) -> np.ndarray:
        """Positive pairs visible during training (train + val positives)."""
        return np.concatenate([self.link_train_pos, self.link_val_pos]).reshape(-1, 2)

    def labels_block(self) -> dict:
        return {
            "node_score": self.node_score.tolist(),
            "node_label": self.node_label.tolist(),
            "subgraphs": [s.tolist() for s in self.subgraphs],
            "sub_density": self.sub_density.tolist(),
            "sub_conductance": self.sub_conductance.tolist(),
            "sub_target": self.sub_target.tolist(),
        }

    def splits_block(self) -> dict:
        return {
            "node": {"train": self.node_train.tolist(), "val": self.node_val.tolist(),
                     "test": self._node_test.tolist()},
            "link": {k: getattr(self, a).tolist() for k, a in (
                ("train_pos", "link_train_pos"), ("train_neg", "link_train_neg"),
                ("val_pos", "link_val_pos"), ("val_neg", "link_val_neg"),
                ("test_pos", "_link_test_pos"), ("test_neg", "_link_test_neg"))},
            "subgraph": {"train": self.sub_train.tolist(), "val": self.sub_val.tolist(),
                         "test": self._sub_test.tolist()},
        }

    @classmethod
    def from_blocks(cls, labels: dict, splits: dict) -> "TaskBundle":
        def ia(x):
            return np.asarray(x, dtype=np.int64)

        def pa(x):
            return np.asarray(x, dtype=np.int64).reshape(-1, 2)

        lk = splits["link"]
        return cls(
            node_score=np.asarray(labels["node_score"], dtype=np.float64),
            node_label=ia(labels["node_label"]),
            node_train=ia(splits["node"]["train"]), node_val=ia(splits["node"]["val"]),
            _node_test=ia(splits["node"]["test"]),
            link_train_pos=pa(lk["train_pos"]), link_train_neg=pa(lk["train_neg"]),
            link_val_pos=pa(lk["val_pos"]), link_val_neg=pa(lk["val_neg"]),
            _link_test_pos=pa(lk["test_pos"]), _link_test_neg=pa(lk["test_neg"]),
            subgraphs=[ia(s) for s in labels["subgraphs"]],
            sub_density=np.asarray(labels["sub_density"], dtype=np.float64),
            sub_conductance=np.asarray(labels["sub_conductance"], dtype=np.float64),
            sub_target=np.asarray(labels["sub_target"], dtype=np.float64),
            sub_train=ia(splits["subgraph"]["train"]), sub_val=ia(splits["subgraph"]["val"]),
            _sub_test=ia(splits["subgraph"]["test"]),
        )

    def equals(self, other: "TaskBundle") -> bool:
        a, b = (self.labels_block(), self.splits_block()), (other.labels_block(), other.splits_block())
        return a == b


def link_folds(g: MultiplexGraph, cfg: GenConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Partition union edges into test/train/val positives (test drawn first) with matched negatives."""
    m = g.n_edges
    n = g.n_nodes
    perm = rng.permutation(m)
    n_test = int(round(cfg.link_test_frac * m))
    n_val = int(round(cfg.link_val_frac * m))
    test_idx = np.sort(perm[:n_test])
    rest = perm[n_test:]
    n_train = min(len(rest) - n_val, int(round(cfg.link_train_frac * m)))
    train_idx = np.sort(rest[:n_train])
    val_idx = np.sort(rest[n_train:n_train + n_val])
    forbidden = set((g.edges[:, 0] * n + g.edges[:, 1]).tolist())
    folds = {}
    # test negatives are drawn first so they are uniform over all non-edges
    for name, idx in (("test", test_idx), ("train", train_idx), ("val", val_idx)):
        folds[f"{name}_pos"] = g.edges[idx].copy()
        folds[f"{name}_neg"] = sample_negatives(n, len(idx), forbidden, rng)
    return folds


def subgraph_tasks(g: MultiplexGraph, cfg: GenConfig, rng: np.random.Generator):
    lo, hi = cfg.subgraph_size
    subsets, dens, cond = [], [], []
    for _ in range(cfg.n_subgraphs):
        size = int(rng.integers(lo, hi + 1))
        s = random_walk_subset(g, min(size, g.n_nodes - 1), rng)
        subsets.append(s)
        dens.append(density(g, s))
        cond.append(conductance(g, s))
    dens = np.array(dens)
    cond = np.array(cond)
    target = 0.5 * minmax(dens) + 0.5 * (1.0 - minmax(cond))
    return subsets, dens, cond, target


def make_task_bundle(g: MultiplexGraph, cfg: GenConfig | None = None, seed: int | None = None) -> TaskBundle:
    cfg = cfg or GenConfig()
    seed = g.meta.get("seed", cfg.seed) if seed is None else seed
    score = node_scores(g)
    labels = tertile_labels(score)
    node_split = stratified_split(labels, substream(seed, "tasks", "node_split"))
    folds = link_folds(g, cfg, substream(seed, "tasks", "links"))
    subsets, dens, cond, target = subgraph_tasks(g, cfg, substream(seed, "tasks", "subgraphs"))
    # regression split stratified on target tertiles
    sub_split = stratified_split(tertile_labels(target), substream(seed, "tasks", "sub_split"))
    bundle = TaskBundle(
        node_score=score, node_label=labels,
        node_train=node_split["train"], node_val=node_split["val"], _node_test=node_split["test"],
        link_train_pos=folds["train_pos"], link_train_neg=folds["train_neg"],
        link_val_pos=folds["val_pos"], link_val_neg=folds["val_neg"],
        _link_test_pos=folds["test_pos"], _link_test_neg=folds["test_neg"],
        subgraphs=subsets, sub_density=dens, sub_conductance=cond, sub_target=target,
        sub_train=sub_split["train"], sub_val=sub_split["val"], _sub_test=sub_split["test"],
    )
    bundle.check_disjoint()
    return bundle
