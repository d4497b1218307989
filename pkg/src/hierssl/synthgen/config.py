"""Generator configuration and seeded random substreams."""
from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator for (seed, name path); stable across runs and platforms."""
    key = tuple(zlib.crc32(str(n).encode()) for n in names)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


@dataclass(frozen=True)
class GenConfig:
    node_range: tuple[int, int] = (700, 900)
    community_range: tuple[int, int] = (6, 10)
    n_sites: int = 3
    latent_dims: tuple[int, int] = (3, 3)
    latent_spread: float = 0.5
    # SC edge logit: beta_comm * same + beta_sim * cos(zB_u, zB_v) + sc_bias
    beta_comm: float = 4.5
    beta_sim: float = 2.0
    sc_bias: float = -8.4
    sc_weight_mu: float = 0.0
    sc_weight_sigma: float = 0.5
    missing_sc: float = 0.25
    ts_length: int = 400
    ar_coef: float = 0.5
    driver_weight: float = 1.0
    # per-node coupling multiplier ~ LogNormal(0, sigma); yields FC hubs
    driver_weight_sigma: float = 0.6
    dt: float = 1.0
    band: tuple[float, float] = (0.10, 0.20)
    fc_top_k: int = 30
    # "union": keep a pair if either endpoint ranks the other in its top-k; "mutual": both must
    fc_symmetrize: str = "mutual"
    feature_noise: float = 0.1
    site_offset_std: float = 0.1
    # rows: volume, thickness, FA, MD, aux1, aux2; the first two and aux1 read z_A, the rest z_B
    loadings: tuple[tuple[float, float, float], ...] = (
        (0.40, 0.25, -0.15),
        (-0.20, 0.35, 0.20),
        (0.80, -0.50, 0.40),
        (-0.45, 0.30, 0.70),
        (0.60, 0.60, -0.30),
        (0.30, -0.70, 0.50),
    )
    link_test_frac: float = 0.15
    link_train_frac: float = 0.70
    link_val_frac: float = 0.15
    n_subgraphs: int = 200
    subgraph_size: tuple[int, int] = (20, 60)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.node_range
        if not 2 <= lo <= hi:
            raise ValueError(f"bad node_range {self.node_range}")
        klo, khi = self.community_range
        if not 1 <= klo <= khi:
            raise ValueError(f"bad community_range {self.community_range}")
        for name in ("missing_sc", "link_test_frac", "link_train_frac", "link_val_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        nyquist = 0.5 / self.dt
        f_lo, f_hi = self.band
        if not 0.0 < f_lo < f_hi < nyquist:
            raise ValueError(f"band {self.band} must lie inside (0, {nyquist})")
        if self.fc_top_k < 1:
            raise ValueError("fc_top_k must be >= 1")
        if self.fc_symmetrize not in ("union", "mutual"):
            raise ValueError(f"fc_symmetrize must be 'union' or 'mutual', got {self.fc_symmetrize!r}")
        if self.ts_length < 128:
            raise ValueError("ts_length must be >= 128")
        if len(self.loadings) != 6:
            raise ValueError("need one loading vector per feature")

    def replace(self, **kw) -> "GenConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown GenConfig fields: {sorted(unknown)}")
        return cls(**{k: _tuplify(v) for k, v in d.items()})

    @classmethod
    def from_file(cls, path) -> "GenConfig":
        doc = yaml.safe_load(Path(path).read_text()) or {}
        return cls.from_dict(doc.get("gen", doc))


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


DEFAULT_GEN = GenConfig()
