"""Task metrics: rank AUC, macro-F1, R^2."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks for ties."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if len(s) == 0 or n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    r = rankdata(s)
    return float((r[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_pairwise(scores, labels) -> float:
    """O(n^2) reference: P(s_pos > s_neg) + 0.5 P(tie)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AUC needs both classes present")
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def macro_f1(pred, true, n_classes: int | None = None) -> float:
    """Unweighted mean of per-class F1 over the classes in ``true`` (or 0..n_classes-1)."""
    pred = np.asarray(pred).ravel()
    true = np.asarray(true).ravel()
    if len(true) == 0:
        raise ValueError("macro-F1 of an empty set")
    classes = np.arange(n_classes) if n_classes is not None else np.unique(true)
    scores = []
    for c in classes:
        tp = np.sum((pred == c) & (true == c))
        fp = np.sum((pred == c) & (true != c))
        fn = np.sum((pred != c) & (true == c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


def r2(pred, true) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    true = np.asarray(true, dtype=np.float64).ravel()
    if len(true) == 0:
        raise ValueError("R^2 of an empty set")
    ss_res = np.sum((true - pred) ** 2)
    ss_tot = np.sum((true - true.mean()) ** 2)
    if ss_tot == 0:
        return 0.0 if ss_res == 0 else -np.inf
    return float(1.0 - ss_res / ss_tot)


METRICS = {"AUC": auc, "F1": macro_f1, "R2": r2}
