"""Pure-Python versions of the compiled graph kernels.

Same signatures and integer outputs as ``_graphkern``; used when the
extension is not built.
"""
from collections import deque

import numpy as np


def bfs_distance_sums(indptr, indices, sources):
    n = len(indptr) - 1
    indptr = indptr.tolist()
    indices = indices.tolist()
    dist_sum = np.zeros(len(sources), dtype=np.int64)
    reach = np.zeros(len(sources), dtype=np.int64)
    for s, src in enumerate(sources.tolist()):
        dist = [-1] * n
        dist[src] = 0
        queue = deque([src])
        total = 0
        cnt = 0
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for w in indices[indptr[u]:indptr[u + 1]]:
                if dist[w] < 0:
                    dist[w] = du
                    total += du
                    cnt += 1
                    queue.append(w)
        dist_sum[s] = total
        reach[s] = cnt
    return dist_sum, reach


def triangle_counts(indptr, indices):
    n = len(indptr) - 1
    nbrs = [set(indices[indptr[u]:indptr[u + 1]].tolist()) for u in range(n)]
    tri = np.zeros(n, dtype=np.int64)
    for u in range(n):
        for v in nbrs[u]:
            if v <= u:
                continue
            for w in nbrs[u] & nbrs[v]:
                if w > v:
                    tri[u] += 1
                    tri[v] += 1
                    tri[w] += 1
    return tri


def common_neighbor_counts(indptr, indices, us, vs):
    n = len(indptr) - 1
    nbrs = [set(indices[indptr[u]:indptr[u + 1]].tolist()) for u in range(n)]
    return np.array([len(nbrs[u] & nbrs[v]) for u, v in zip(us.tolist(), vs.tolist())],
                    dtype=np.int64)
