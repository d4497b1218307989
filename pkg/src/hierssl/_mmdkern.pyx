# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise pass for the multi-bandwidth RBF kernel block.

The caller evaluates k = exp(-c d^2) for the widest bandwidth (numpy's
vectorized exp); this pass derives the narrower bandwidths by repeated
squaring. See ``_mmdkern_py`` for the reference implementation.
"""


def rbf_levels_inplace(double[:, ::1] k, const double[::1] kcoef, const double[::1] wcoef):
    """Overwrite k with W = sum_l wcoef[l] * k^(2^l); return the sum of sum_l kcoef[l] * k^(2^l)."""
    cdef Py_ssize_t n = k.shape[0], m = k.shape[1], levels = kcoef.shape[0]
    cdef Py_ssize_t i, j, lev
    cdef double e, kv, wv, total = 0.0, row
    for i in range(n):
        row = 0.0
        for j in range(m):
            e = k[i, j]
            kv = 0.0
            wv = 0.0
            for lev in range(levels):
                kv = kv + kcoef[lev] * e
                wv = wv + wcoef[lev] * e
                e = e * e
            row += kv
            k[i, j] = wv
        total += row
    return total
