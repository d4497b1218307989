"""Backend selection for the hot kernels (graph traversal counts, RBF kernel blocks).

The compiled extension is preferred; the pure-Python module is used when it
is missing. ``use_backend`` switches explicitly (tests and benchmarks).
"""
import numpy as np

from types import SimpleNamespace

from . import _graphkern_py, _mmdkern_py

try:
    from . import _graphkern, _mmdkern
except ImportError:  # extension not built
    _graphkern = _mmdkern = None


def _bundle(graph_mod, mmd_mod):
    return SimpleNamespace(
        bfs_distance_sums=graph_mod.bfs_distance_sums,
        triangle_counts=graph_mod.triangle_counts,
        common_neighbor_counts=graph_mod.common_neighbor_counts,
        rbf_levels_inplace=mmd_mod.rbf_levels_inplace,
    )


_BACKENDS = {"python": _bundle(_graphkern_py, _mmdkern_py)}
if _graphkern is not None:
    _BACKENDS["compiled"] = _bundle(_graphkern, _mmdkern)
_compiled = _graphkern

BACKEND = "compiled" if _compiled is not None else "python"


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous name."""
    global BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    prev, BACKEND = BACKEND, name
    return prev


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def bfs_distance_sums(indptr, indices, sources):
    return _BACKENDS[BACKEND].bfs_distance_sums(_i64(indptr), _i64(indices), _i64(sources))


def triangle_counts(indptr, indices):
    return _BACKENDS[BACKEND].triangle_counts(_i64(indptr), _i64(indices))


def common_neighbor_counts(indptr, indices, us, vs):
    return _BACKENDS[BACKEND].common_neighbor_counts(
        _i64(indptr), _i64(indices), _i64(us), _i64(vs))


def _bandwidth_levels(sigmas):
    """Express each bandwidth as a squaring level of the widest kernel, or None."""
    smax = max(sigmas)
    levels = []
    for s in sigmas:
        ratio = (smax / s) ** 2
        r = int(round(ratio))
        if abs(ratio - r) > 1e-12 or r & (r - 1):
            return None
        levels.append(r.bit_length() - 1)
    return smax, levels


def rbf_block(x, y, sigmas, sx=None, sy=None):
    """(sum_ij kbar_ij, W) for kbar = mean_s exp(-|x_i - y_j|^2 / 2s^2), W = mean_s k_s / s^2.

    ``sx``/``sy`` are optional precomputed squared row norms.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    sigmas = tuple(float(s) for s in sigmas)
    ns = len(sigmas)
    sx = (x * x).sum(1) if sx is None else sx
    sy = (y * y).sum(1) if sy is None else sy
    g = x @ y.T
    spec = _bandwidth_levels(sigmas)
    if spec is None:
        # generic bandwidths: one exp per sigma
        d2 = np.maximum(sx[:, None] + sy[None, :] - 2.0 * g, 0.0)
        kval = np.zeros_like(d2)
        w = np.zeros_like(d2)
        for s in sigmas:
            k = np.exp(d2 * (-0.5 / (s * s)))
            kval += k
            w += k / (s * s)
        return float(kval.sum()) / ns, w / ns
    smax, levels = spec
    kcoef = np.zeros(max(levels) + 1)
    wcoef = np.zeros(max(levels) + 1)
    for s, lev in zip(sigmas, levels):
        kcoef[lev] += 1.0 / ns
        wcoef[lev] += 1.0 / (ns * s * s)
    # k = exp(-|x - y|^2 / 2 smax^2), built in place in the Gram matrix
    k = np.ascontiguousarray(g)
    k *= -2.0
    k += sx[:, None]
    k += sy[None, :]
    np.maximum(k, 0.0, out=k)
    k *= -0.5 / (smax * smax)
    np.exp(k, out=k)
    total = _BACKENDS[BACKEND].rbf_levels_inplace(k, kcoef, wcoef)
    return float(total), k


def _with_ones(x):
    return np.hstack([x, np.ones((len(x), 1))])


def rbf_stats_sym(x, sigmas, tile: int = 128):
    """``rbf_stats(x, x)`` using symmetry: only tiles on or above the diagonal are evaluated.

    Returns (sum_ij kbar_ij, W 1, W x).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n, d = x.shape
    sq = (x * x).sum(1)
    x1 = _with_ones(x)
    total = 0.0
    acc = np.zeros((n, d + 1))      # [W x | W 1]
    for i0 in range(0, n, tile):
        i1 = min(i0 + tile, n)
        part, w = rbf_block(x[i0:i1], x[i0:i1], sigmas, sq[i0:i1], sq[i0:i1])
        total += part
        acc[i0:i1] += w @ x1[i0:i1]
        if i1 < n:
            part, w = rbf_block(x[i0:i1], x[i1:], sigmas, sq[i0:i1], sq[i1:])
            total += 2.0 * part
            acc[i0:i1] += w @ x1[i1:]
            acc[i1:] += w.T @ x1[i0:i1]
    return total, acc[:, d], acc[:, :d]


def rbf_stats(x, y, sigmas, tile: int = 128):
    """Row-tiled ``rbf_block`` that keeps only what the MMD gradient needs.

    Returns (sum_ij kbar_ij, W 1, W y, W^T 1, W^T x). No n x m matrix is
    materialized, so the cost is arithmetic rather than memory traffic.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = x.shape
    sx, sy = (x * x).sum(1), (y * y).sum(1)
    x1, y1 = _with_ones(x), _with_ones(y)
    total = 0.0
    rows = np.empty((n, d + 1))     # [W y | W 1]
    cols = np.zeros((len(y), d + 1))  # [W^T x | W^T 1]
    for i0 in range(0, n, tile):
        i1 = min(i0 + tile, n)
        part, w = rbf_block(x[i0:i1], y, sigmas, sx[i0:i1], sy)
        total += part
        rows[i0:i1] = w @ y1
        cols += w.T @ x1[i0:i1]
    return total, rows[:, d], rows[:, :d], cols[:, d], cols[:, :d]
