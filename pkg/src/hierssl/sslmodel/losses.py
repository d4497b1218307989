"""SimSiam, MMD, VICReg-style terms and the composite objective."""
from __future__ import annotations

import warnings

import numpy as np

from ..numcore import tape as T
from .config import ModelConfig
from .model import View, forward, predict


def neg_cosine(p, z):
    """mean over rows of -<p_hat, sg(z_hat)>; zero-norm rows contribute 0."""
    ph = T.l2_normalize_rows(p)
    zh = T.stop_gradient(T.l2_normalize_rows(z))
    return T.scale(T.mean(T.row_sum(ph * zh)), -1.0) if p.shape[0] else None


def simsiam_loss(p_a, z_b, p_b, z_a):
    """0.5 * [l(p_A, z_B) + l(p_B, z_A)] with l(p, z) = -cos(p, sg(z))."""
    return T.scale(neg_cosine(p_a, z_b) + neg_cosine(p_b, z_a), 0.5)


def subsample_rows(z, cap: int, rng: np.random.Generator):
    if z.shape[0] <= cap:
        return z
    idx = np.sort(rng.choice(z.shape[0], size=cap, replace=False))
    return T.gather_rows(z, idx)


def mmd_loss(z_a, z_b, sigmas, cap: int, rng: np.random.Generator):
    """Biased MMD^2 averaged over bandwidths; each side capped at ``cap`` rows."""
    if z_a.shape[0] < 2 or z_b.shape[0] < 2:
        warnings.warn("MMD needs at least two rows per side; term set to 0", RuntimeWarning)
        return None
    return T.mmd_rbf(subsample_rows(z_a, cap, rng), subsample_rows(z_b, cap, rng), sigmas)


def variance_term(z, gamma: float = 0.2, eps: float = 1e-6):
    """sum_d ReLU(gamma - sqrt(Var_pop(z_d) + eps))."""
    if z.shape[0] < 2:
        raise ValueError("variance term needs at least two rows")
    zc = z - T.mean_rows(z)
    std = T.sqrt(T.mean_rows(T.square(zc)) + eps)
    return T.total(T.relu(T.scale(std, -1.0) + gamma))


def covariance_term(z):
    """sum_{i != j} C_ij^2 of the population covariance over rows."""
    n, d = z.shape
    if n < 2:
        raise ValueError("covariance term needs at least two rows")
    zc = z - T.mean_rows(z)
    c = T.scale(T.transpose(zc) @ zc, 1.0 / n)
    off = c * (1.0 - np.eye(d))
    return T.total(T.square(off))


def vicreg_terms(z, gamma: float = 0.2, eps: float = 1e-6):
    return variance_term(z, gamma, eps), covariance_term(z)


def node_mse(z_a, z_b):
    return T.mean(T.square(z_a - z_b))


TERMS = ("simsiam_node", "simsiam_edge", "simsiam_graph", "mmd", "var", "cov", "mse")


class NonFiniteLossError(FloatingPointError):
    def __init__(self, term: str):
        self.term = term
        super().__init__(f"non-finite value in loss term {term!r}")


def _edge_intersection(va: View, vb: View):
    """Positions (in view A, in view B) of base edges retained by both views."""
    common, ia, ib = np.intersect1d(va.edge_ids, vb.edge_ids, assume_unique=True,
                                    return_indices=True)
    return ia, ib


def total_loss(v: dict, va: View, vb: View, cfg: ModelConfig, rng: np.random.Generator,
               parts_out: dict | None = None):
    """Composite objective on two views. Returns (loss Var, {term: float}).

    1.0 * (node + edge + graph SimSiam) + lambda_E * MMD + alpha * sum var
    + beta * sum cov + 1.0 * node MSE; ablated terms are reported as exact zeros.
    If ``parts_out`` is given it receives the unweighted term Vars that were computed.
    """
    oa = forward(v, va, cfg, "train")
    ob = forward(v, vb, cfg, "train")
    parts: dict[str, T.Var | None] = dict.fromkeys(TERMS)
    weights = {"simsiam_node": cfg.lambda_pn, "simsiam_edge": cfg.lambda_pe,
               "simsiam_graph": cfg.lambda_pg, "mmd": cfg.lambda_e,
               "var": cfg.alpha, "cov": cfg.beta, "mse": cfg.mse_weight}

    parts["simsiam_node"] = simsiam_loss(predict(v, "node", oa.z_n, cfg), ob.z_n,
                                         predict(v, "node", ob.z_n, cfg), oa.z_n)
    parts["simsiam_graph"] = simsiam_loss(predict(v, "graph", oa.z_g, cfg), ob.z_g,
                                          predict(v, "graph", ob.z_g, cfg), oa.z_g)
    embs = [oa.z_n, ob.z_n]
    if cfg.edge_head:
        ia, ib = _edge_intersection(va, vb)
        if len(ia):
            ea = T.gather_rows(oa.z_e, ia)
            eb = T.gather_rows(ob.z_e, ib)
            parts["simsiam_edge"] = simsiam_loss(predict(v, "edge", ea, cfg), eb,
                                                 predict(v, "edge", eb, cfg), ea)
        if cfg.lambda_e != 0.0:
            parts["mmd"] = mmd_loss(oa.z_e, ob.z_e, cfg.mmd_sigmas, cfg.mmd_cap, rng)
        embs += [oa.z_e, ob.z_e]
    if cfg.var_floor:
        parts["var"] = _sum([variance_term(z, cfg.gamma, cfg.var_eps) for z in embs if z.shape[0] >= 2])
    if cfg.cov:
        parts["cov"] = _sum([covariance_term(z) for z in embs if z.shape[0] >= 2])
    parts["mse"] = node_mse(oa.z_n, ob.z_n)

    if parts_out is not None:
        parts_out.update({k: t for k, t in parts.items() if t is not None})
    loss = None
    breakdown = {}
    for name in TERMS:
        term = parts[name]
        val = 0.0 if term is None else float(term.value)
        if not np.isfinite(val):
            raise NonFiniteLossError(name)
        breakdown[name] = val
        if term is None or weights[name] == 0.0:
            continue
        wt = T.scale(term, weights[name])
        loss = wt if loss is None else loss + wt
    if loss is None:
        loss = T.scale(T.total(oa.z_n), 0.0)
    breakdown["total"] = float(loss.value)
    return loss, breakdown


def _sum(terms):
    out = None
    for t in terms:
        out = t if out is None else out + t
    return out
