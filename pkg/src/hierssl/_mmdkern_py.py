"""Pure-numpy version of the RBF level pass (same arithmetic as ``_mmdkern``)."""
import numpy as np


def rbf_levels_inplace(k, kcoef, wcoef):
    kv = np.zeros_like(k)
    wv = np.zeros_like(k)
    for lev in range(len(kcoef)):
        if kcoef[lev] != 0.0:
            kv += kcoef[lev] * k
            wv += wcoef[lev] * k
        if lev + 1 < len(kcoef):
            k *= k
    k[...] = wv
    return float(kv.sum(axis=1).sum())
