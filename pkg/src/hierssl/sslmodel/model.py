"""Parameters, views, GraphSAGE backbone and the node / edge / graph heads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..graphcore.graph import MultiplexGraph
from ..numcore import tape as T
from ..synthgen.config import substream
from .config import ModelConfig

N_FEATURES = 6
N_ATTRS = 2


# -- parameters ---------------------------------------------------------------

def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _mlp_params(prefix, d_in, d_hidden, d_out, rng) -> dict:
    return {
        f"{prefix}.w1": _uniform(rng, d_in, (d_in, d_hidden)),
        f"{prefix}.b1": _uniform(rng, d_in, (1, d_hidden)),
        f"{prefix}.ln_g": np.ones((1, d_hidden)),
        f"{prefix}.ln_b": np.zeros((1, d_hidden)),
        f"{prefix}.w2": _uniform(rng, d_hidden, (d_hidden, d_out)),
        f"{prefix}.b2": _uniform(rng, d_hidden, (1, d_out)),
    }


def init_params(cfg: ModelConfig, seed: int, n_features: int = N_FEATURES) -> dict[str, np.ndarray]:
    """Seeded U(-1/sqrt(fan_in), 1/sqrt(fan_in)) init; each block has its own substream."""
    def rng(name):
        return substream(seed, "init", name)

    p: dict[str, np.ndarray] = {}
    d_in = n_features
    for layer in range(cfg.depth):
        r = rng(f"sage{layer}")
        p[f"sage.{layer}.ws"] = _uniform(r, d_in, (d_in, cfg.hidden))
        p[f"sage.{layer}.wn"] = _uniform(r, d_in, (d_in, cfg.hidden))
        d_in = cfg.hidden
    h, e = cfg.hidden, cfg.emb_dim
    p.update(_mlp_params("node", h, h, e, rng("node")))
    p.update(_mlp_params("graph", h, h, e, rng("graph")))
    p["readout.q"] = _uniform(rng("readout"), h, (h, 1))
    if cfg.edge_head:
        r = rng("phi")
        p["phi.w"] = _uniform(r, N_ATTRS, (N_ATTRS, cfg.phi_dim))
        p["phi.b"] = _uniform(r, N_ATTRS, (1, cfg.phi_dim))
        p.update(_mlp_params("edge", 2 * h + cfg.phi_dim, h, e, rng("edge")))
    if cfg.predictors:
        for scale in ("node", "edge", "graph"):
            if scale == "edge" and not cfg.edge_head:
                continue
            p.update(_mlp_params(f"pred_{scale}", e, max(1, e // 2), e, rng(f"pred_{scale}")))
    return p


# -- inputs and views ---------------------------------------------------------

def standardize_features(x: np.ndarray) -> np.ndarray:
    """Column-wise z-scores over the nodes of one graph (constant columns -> 0)."""
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def mean_operator(edges: np.ndarray, n: int) -> sp.csr_matrix:
    """Row-normalized symmetric adjacency; isolated nodes get an all-zero row."""
    if len(edges) == 0:
        return sp.csr_matrix((n, n))
    r = np.concatenate([edges[:, 0], edges[:, 1]])
    c = np.concatenate([edges[:, 1], edges[:, 0]])
    a = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return (sp.diags(inv) @ a).tocsr()


@dataclass
class View:
    x: np.ndarray              # masked, standardized features (N, F)
    edges: np.ndarray          # retained edges (m, 2)
    attrs: np.ndarray          # their attributes (m, 2)
    edge_ids: np.ndarray       # indices into the base edge list, sorted
    op: sp.csr_matrix          # neighbor-mean operator on the retained edges


def make_view(x_std: np.ndarray, g: MultiplexGraph, mask_p: float, keep: float,
              rng: np.random.Generator) -> View:
    """Bernoulli(mask_p) feature zeroing per entry; exactly round(keep*M) edges kept."""
    x = x_std
    if mask_p > 0:
        x = np.where(rng.random(x.shape) < mask_p, 0.0, x_std)
    m = g.n_edges
    n_keep = int(np.floor(keep * m + 0.5))
    if n_keep >= m:
        ids = np.arange(m)
    else:
        ids = np.sort(rng.choice(m, size=n_keep, replace=False))
    edges = g.edges[ids]
    return View(x=np.array(x, dtype=np.float64), edges=edges, attrs=g.edge_attrs[ids],
                edge_ids=ids, op=mean_operator(edges, g.n_nodes))


def augment(g: MultiplexGraph, rng: np.random.Generator, cfg: ModelConfig,
            x_std: np.ndarray | None = None) -> View:
    x_std = standardize_features(g.features) if x_std is None else x_std
    return make_view(x_std, g, cfg.effective_mask_p, cfg.effective_keep, rng)


def base_view(g: MultiplexGraph, x_std: np.ndarray | None = None) -> View:
    x_std = standardize_features(g.features) if x_std is None else x_std
    ids = np.arange(g.n_edges)
    return View(x=x_std, edges=g.edges, attrs=g.edge_attrs, edge_ids=ids,
                op=mean_operator(g.edges, g.n_nodes))


# -- forward ------------------------------------------------------------------

def mlp(v: dict, prefix: str, x):
    """Linear -> LayerNorm -> ReLU -> Linear."""
    h = x @ v[f"{prefix}.w1"] + v[f"{prefix}.b1"]
    h = T.relu(T.layer_norm(h, v[f"{prefix}.ln_g"], v[f"{prefix}.ln_b"]))
    return h @ v[f"{prefix}.w2"] + v[f"{prefix}.b2"]


def backbone(v: dict, view: View, depth: int, tape: T.Tape):
    """h <- ReLU(h W_s + MEAN_{N(v)}(h) W_n), ``depth`` times; no edge attributes."""
    h = tape.const(view.x)
    for layer in range(depth):
        h = T.relu(h @ v[f"sage.{layer}.ws"] + T.spmm(view.op, h) @ v[f"sage.{layer}.wn"])
    return h


def readout_weights(v: dict, h, mode: str, tau: float):
    """Train: softmax(s / tau); eval: sigmoid(s) / sum(sigmoid(s)); s = h q."""
    s = h @ v["readout.q"]
    if mode == "train":
        return T.softmax(s, temperature=tau)
    if mode == "eval":
        sg = T.sigmoid(s)
        return sg * T.reciprocal(T.total(sg))
    raise ValueError(f"unknown readout mode {mode!r}")


def graph_embedding(v: dict, h, mode: str, tau: float):
    w = readout_weights(v, h, mode, tau)
    pooled = T.transpose(w) @ h          # (1, hidden)
    return mlp(v, "graph", pooled)


def edge_embedding(v: dict, h, pairs: np.ndarray, attrs: np.ndarray | None):
    """MLP_edge([h_u; h_v; phi(a_uv)]); ``attrs=None`` feeds the zero attribute vector."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    tape = h.tape
    if attrs is None:
        attrs = np.zeros((len(pairs), N_ATTRS))
    phi = T.relu(tape.const(attrs) @ v["phi.w"] + v["phi.b"])
    x = T.concat_cols([T.gather_rows(h, pairs[:, 0]), T.gather_rows(h, pairs[:, 1]), phi])
    return mlp(v, "edge", x)


@dataclass
class Outputs:
    h: T.Var
    z_n: T.Var
    z_e: T.Var | None
    z_g: T.Var


def heads(v: dict, h, view: View, cfg: ModelConfig, mode: str) -> Outputs:
    z_n = mlp(v, "node", h)
    z_g = graph_embedding(v, h, mode, cfg.tau)
    z_e = None
    if cfg.edge_head:
        z_e = edge_embedding(v, h, view.edges, view.attrs)
        if mode == "train" and cfg.normalize_edges:
            z_e = T.l2_normalize_rows(z_e)
    return Outputs(h=h, z_n=z_n, z_e=z_e, z_g=z_g)


def forward(v: dict, view: View, cfg: ModelConfig, mode: str = "train") -> Outputs:
    tape = next(iter(v.values())).tape
    return heads(v, backbone(v, view, cfg.depth, tape), view, cfg, mode)


def predict(v: dict, scale: str, z, cfg: ModelConfig):
    """Predictor MLP (bottleneck emb/2); identity when predictors are ablated."""
    if not cfg.predictors:
        return z
    return mlp(v, f"pred_{scale}", z)
