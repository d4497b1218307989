# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels on CSR adjacency (sorted neighbor lists).

Every kernel returns integer counts so results are bit-identical to the
pure-Python versions in ``_graphkern_py``.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def bfs_distance_sums(const long[::1] indptr, const long[::1] indices,
                      const long[::1] sources):
    """Per-source sum of hop distances and count of reachable targets."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t ns = sources.shape[0]
    cdef cnp.ndarray[long, ndim=1] dist_sum = np.zeros(ns, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] reach = np.zeros(ns, dtype=np.int64)
    cdef long[::1] dist = np.empty(n, dtype=np.int64)
    cdef long[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t s, i, head, tail, k
    cdef long u, w, total, cnt
    for s in range(ns):
        for i in range(n):
            dist[i] = -1
        u = sources[s]
        dist[u] = 0
        queue[0] = u
        head = 0
        tail = 1
        total = 0
        cnt = 0
        while head < tail:
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    total += dist[w]
                    cnt += 1
                    queue[tail] = w
                    tail += 1
        dist_sum[s] = total
        reach[s] = cnt
    return dist_sum, reach


def triangle_counts(const long[::1] indptr, const long[::1] indices):
    """Number of triangles through each node."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[long, ndim=1] tri = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t u, k, a, b, ea, eb
    cdef long v, t, x, y
    for u in range(n):
        t = 0
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if v <= u:
                continue
            # |N(u) ∩ N(v)| restricted to w > v counts each triangle once
            a = indptr[u]
            ea = indptr[u + 1]
            b = indptr[v]
            eb = indptr[v + 1]
            while a < ea and b < eb:
                x = indices[a]
                y = indices[b]
                if x < y:
                    a += 1
                elif y < x:
                    b += 1
                else:
                    if x > v:
                        tri[u] += 1
                        tri[v] += 1
                        tri[x] += 1
                    a += 1
                    b += 1
    return tri


def common_neighbor_counts(const long[::1] indptr, const long[::1] indices,
                           const long[::1] us, const long[::1] vs):
    """|N(u) ∩ N(v)| for each queried pair."""
    cdef Py_ssize_t m = us.shape[0]
    cdef cnp.ndarray[long, ndim=1] out = np.zeros(m, dtype=np.int64)
    cdef Py_ssize_t i, a, b, ea, eb
    cdef long c, x, y
    for i in range(m):
        a = indptr[us[i]]
        ea = indptr[us[i] + 1]
        b = indptr[vs[i]]
        eb = indptr[vs[i] + 1]
        c = 0
        while a < ea and b < eb:
            x = indices[a]
            y = indices[b]
            if x < y:
                a += 1
            elif y < x:
                b += 1
            else:
                c += 1
                a += 1
                b += 1
        out[i] = c
    return out
