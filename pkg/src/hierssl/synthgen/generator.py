"""Neuro-inspired multiplex graph generator.

Pipeline: communities and sites -> latents -> node features -> SC edges ->
missing SC -> FC edges from band-passed AR(1) series -> union assembly.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..graphcore.graph import MultiplexGraph, canonical_edges
from .config import GenConfig, substream


def assign_communities(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Round-robin labels 0..k-1, shuffled over nodes."""
    return rng.permutation(np.arange(n) % k).astype(np.int64)


def sample_latents(cfg: GenConfig, k: int, community: np.ndarray, rng: np.random.Generator):
    """Community centers ~ N(0, I); node latents ~ N(center, spread^2 I). Returns (z_a, z_b, centers)."""
    da, db = cfg.latent_dims
    mu_a = rng.standard_normal((k, da))
    mu_b = rng.standard_normal((k, db))
    n = len(community)
    z_a = mu_a[community] + cfg.latent_spread * rng.standard_normal((n, da))
    z_b = mu_b[community] + cfg.latent_spread * rng.standard_normal((n, db))
    return z_a, z_b, (mu_a, mu_b)


def node_features(z_a: np.ndarray, z_b: np.ndarray, site: np.ndarray, cfg: GenConfig,
                  rng: np.random.Generator, n_sites: int | None = None) -> np.ndarray:
    w = np.asarray(cfg.loadings, dtype=np.float64)
    n = z_a.shape[0]
    eps = cfg.feature_noise * rng.standard_normal((n, 6))
    x = np.empty((n, 6))
    x[:, 0] = np.exp(z_a @ w[0] + eps[:, 0])       # volume
    x[:, 1] = np.exp(z_a @ w[1] + eps[:, 1])       # thickness
    x[:, 2] = expit(z_b @ w[2] + eps[:, 2])        # FA
    x[:, 3] = expit(z_b @ w[3] + eps[:, 3])        # MD
    x[:, 4] = z_a @ w[4] + eps[:, 4]
    x[:, 5] = z_b @ w[5] + eps[:, 5]
    offsets = cfg.site_offset_std * rng.standard_normal((n_sites or cfg.n_sites, 6))
    return x + offsets[site]


def _cosine_matrix(z: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(z, axis=1, keepdims=True)
    u = np.divide(z, norm, out=np.zeros_like(z), where=norm > 0)
    return u @ u.T


def sc_edge_prob(z_b: np.ndarray, community: np.ndarray, cfg: GenConfig) -> np.ndarray:
    same = community[:, None] == community[None, :]
    logit = cfg.beta_comm * same + cfg.beta_sim * _cosine_matrix(z_b) + cfg.sc_bias
    return expit(logit)


def sc_edges(z_b: np.ndarray, community: np.ndarray, cfg: GenConfig, rng: np.random.Generator):
    """Independent Bernoulli per unordered pair; LogNormal weights. Returns (pairs, weights)."""
    n = len(community)
    p = sc_edge_prob(z_b, community, cfg)
    iu, ju = np.triu_indices(n, k=1)
    draw = rng.random(len(iu)) < p[iu, ju]
    pairs = np.stack([iu[draw], ju[draw]], axis=1).astype(np.int64)
    weights = rng.lognormal(cfg.sc_weight_mu, cfg.sc_weight_sigma, size=len(pairs))
    return pairs, weights


def apply_missing_sc(pairs: np.ndarray, weights: np.ndarray, fraction: float,
                     rng: np.random.Generator):
    """Drop floor(fraction * |SC|) uniformly chosen SC edges. Returns (pairs, weights, removed_idx)."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("missing-SC fraction must lie in [0, 1)")
    m = len(pairs)
    n_drop = int(np.floor(fraction * m))
    removed = np.sort(rng.choice(m, size=n_drop, replace=False)) if n_drop else np.zeros(0, np.int64)
    keep = np.ones(m, dtype=bool)
    keep[removed] = False
    return pairs[keep], weights[keep], removed


def simulate_timeseries(community: np.ndarray, k: int, cfg: GenConfig,
                        rng: np.random.Generator) -> np.ndarray:
    """AR(1) nodes coupled to their community's AR(1) driver through its innovations.

    Returns an (N, T) array. Unit-variance Gaussian innovations throughout.
    """
    n = len(community)
    t_len = cfg.ts_length
    burn = 50
    eta = rng.standard_normal((k, t_len + burn))
    xi = rng.standard_normal((n, t_len + burn))
    coupling = cfg.driver_weight * np.exp(cfg.driver_weight_sigma * rng.standard_normal(n))
    drive = coupling[:, None] * eta[community] + xi
    x = np.empty((n, t_len + burn))
    x[:, 0] = drive[:, 0]
    rho = cfg.ar_coef
    for t in range(1, t_len + burn):
        x[:, t] = rho * x[:, t - 1] + drive[:, t]
    return x[:, burn:]


def bandpass(series: np.ndarray, band=(0.10, 0.20), dt: float = 1.0) -> np.ndarray:
    """Brick-wall DFT mask keeping |f| inside [lo, hi]; output is real and zero-mean."""
    lo, hi = band
    nyquist = 0.5 / dt
    if not 0.0 < lo < hi < nyquist:
        raise ValueError(f"band {band} must lie inside (0, {nyquist}) Hz")
    series = np.asarray(series, dtype=np.float64)
    t_len = series.shape[-1]
    spec = np.fft.rfft(series, axis=-1)
    freqs = np.fft.rfftfreq(t_len, d=dt)
    keep = (freqs >= lo) & (freqs <= hi)
    spec[..., ~keep] = 0.0
    return np.fft.irfft(spec, n=t_len, axis=-1)


def correlation_matrix(series: np.ndarray) -> np.ndarray:
    """Pearson correlation between rows; constant rows correlate 0 with everything."""
    x = series - series.mean(axis=1, keepdims=True)
    norm = np.linalg.norm(x, axis=1)
    ok = norm > 1e-12 * max(1.0, float(np.abs(series).max(initial=0.0)))
    u = np.zeros_like(x)
    u[ok] = x[ok] / norm[ok, None]
    c = np.clip(u @ u.T, -1.0, 1.0)
    np.fill_diagonal(c, np.where(ok, 1.0, 0.0))
    return c


def fc_edges(filtered: np.ndarray, top_k: int = 30, symmetrize: str = "union"):
    """Top-k correlation graph. Returns (pairs, correlations).

    Every node ranks its ``top_k`` partners by correlation (ties resolved toward
    the lower node id). ``symmetrize="union"`` keeps a pair chosen by either
    endpoint; ``"mutual"`` keeps it only when both endpoints chose each other.
    """
    if symmetrize not in ("union", "mutual"):
        raise ValueError(f"unknown symmetrize mode {symmetrize!r}")
    c = correlation_matrix(filtered)
    n = c.shape[0]
    k = min(top_k, n - 1)
    if k <= 0:
        return np.zeros((0, 2), np.int64), np.zeros(0)
    score = c.copy()
    np.fill_diagonal(score, -np.inf)
    # stable sort on (-corr) keeps lower ids first among ties
    order = np.argsort(-score, axis=1, kind="stable")[:, :k]
    chosen = np.zeros((n, n), dtype=bool)
    chosen[np.repeat(np.arange(n), k), order.ravel()] = True
    keep = chosen & chosen.T if symmetrize == "mutual" else chosen | chosen.T
    iu, ju = np.nonzero(np.triu(keep, k=1))
    pairs = np.stack([iu, ju], axis=1).astype(np.int64)
    return pairs, c[iu, ju]


def assemble(features, community, site, k, sc_pairs, sc_w, fc_pairs, fc_c, meta=None):
    n = features.shape[0]
    allp = np.concatenate([sc_pairs.reshape(-1, 2), fc_pairs.reshape(-1, 2)])
    edges = canonical_edges(allp, n)
    key = edges[:, 0] * n + edges[:, 1]
    attrs = np.zeros((len(edges), 2))
    present = np.zeros((len(edges), 2), dtype=bool)
    for ch, (pairs, vals) in enumerate(((sc_pairs, sc_w), (fc_pairs, fc_c))):
        if len(pairs):
            pos = np.searchsorted(key, pairs[:, 0] * n + pairs[:, 1])
            attrs[pos, ch] = vals
            present[pos, ch] = True
    return MultiplexGraph(features=features, edges=edges, edge_attrs=attrs,
                          channel_present=present, community=community, site=site,
                          n_communities=k, meta=meta or {})


def _ensure_connected(g: MultiplexGraph, z_b, rng) -> MultiplexGraph:
    """Bridge stray components to the largest one with an FC-free SC edge each."""
    from scipy.sparse.csgraph import connected_components

    n_comp, labels = connected_components(g.adjacency, directed=False)
    if n_comp == 1:
        return g
    big = np.argmax(np.bincount(labels))
    main = np.flatnonzero(labels == big)
    extra = []
    cos = _cosine_matrix(z_b)
    for c in range(n_comp):
        if c == big:
            continue
        members = np.flatnonzero(labels == c)
        v = members[0]
        u = main[np.argmax(cos[v, main])]
        extra.append((min(u, v), max(u, v)))
    extra = np.array(extra, dtype=np.int64)
    w = rng.lognormal(0.0, 0.5, size=len(extra))
    sc_mask = g.channel_present[:, 0]
    sc_pairs = np.concatenate([g.edges[sc_mask], extra])
    sc_w = np.concatenate([g.edge_attrs[sc_mask, 0], w])
    fc_mask = g.channel_present[:, 1]
    return assemble(g.features, g.community, g.site, g.n_communities, sc_pairs, sc_w,
                    g.edges[fc_mask], g.edge_attrs[fc_mask, 1], g.meta)


def generate_graph(cfg: GenConfig, seed: int) -> MultiplexGraph:
    """One multiplex graph; every random draw comes from a named substream of ``seed``."""
    top = substream(seed, "size")
    n = int(top.integers(cfg.node_range[0], cfg.node_range[1] + 1))
    k = int(top.integers(cfg.community_range[0], cfg.community_range[1] + 1))
    k = min(k, n)
    community = assign_communities(n, k, substream(seed, "communities"))
    site = substream(seed, "sites").integers(0, cfg.n_sites, size=n).astype(np.int64)
    z_a, z_b, _ = sample_latents(cfg, k, community, substream(seed, "latents"))
    x = node_features(z_a, z_b, site, cfg, substream(seed, "features"))
    sc_p, sc_w = sc_edges(z_b, community, cfg, substream(seed, "sc"))
    sc_p, sc_w, _ = apply_missing_sc(sc_p, sc_w, cfg.missing_sc, substream(seed, "missing_sc"))
    series = simulate_timeseries(community, k, cfg, substream(seed, "timeseries"))
    filtered = bandpass(series, cfg.band, cfg.dt)
    fc_p, fc_c = fc_edges(filtered, cfg.fc_top_k, cfg.fc_symmetrize)
    g = assemble(x, community, site, k, sc_p, sc_w, fc_p, fc_c, meta={"seed": int(seed)})
    return _ensure_connected(g, z_b, substream(seed, "bridges"))
