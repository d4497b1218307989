"""Paired bootstrap over shared test items."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SignificanceResult:
    diff: float
    ci_low: float
    ci_high: float
    p_value: float
    n_resamples: int = 2000
    alpha: float = 0.05

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha


def paired_bootstrap(items_a, items_b, n: int = 2000, rng: np.random.Generator | None = None,
                     metric: Callable | None = None, alpha: float = 0.05) -> SignificanceResult:
    """Difference metric(a) - metric(b) under joint resampling of item indices.

    ``items_*`` are per-item arrays (first axis = item). ``metric(items, idx)``
    scores a resample; the default is the mean of per-item contributions.
    CI = percentile [2.5, 97.5]; p = 2 min(P(d <= 0), P(d >= 0)) clamped to [1/n, 1].
    """
    a = np.asarray(items_a)
    b = np.asarray(items_b)
    if len(a) != len(b):
        raise ValueError(f"paired bootstrap needs equal lengths, got {len(a)} and {len(b)}")
    if len(a) == 0:
        raise ValueError("paired bootstrap of empty item sets")
    rng = rng if rng is not None else np.random.default_rng(0)
    if metric is None:
        def metric(items, idx):
            return float(np.mean(items[idx]))
    m = len(a)
    full = np.arange(m)
    observed = metric(a, full) - metric(b, full)
    diffs = np.empty(n)
    for i in range(n):
        idx = rng.integers(0, m, size=m)
        diffs[i] = metric(a, idx) - metric(b, idx)
    lo, hi = np.percentile(diffs, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    lo, hi = min(lo, observed), max(hi, observed)
    p = 2.0 * min(np.mean(diffs <= 0), np.mean(diffs >= 0))
    p = float(min(1.0, max(1.0 / n, p)))
    return SignificanceResult(diff=float(observed), ci_low=float(lo), ci_high=float(hi),
                              p_value=p, n_resamples=n, alpha=alpha)
