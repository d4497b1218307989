"""Model / training configuration, ablation variants and the tuning grid."""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 64
    depth: int = 2
    emb_dim: int = 64
    lambda_e: float = 1.0
    lambda_pn: float = 1.0
    lambda_pe: float = 1.0
    lambda_pg: float = 1.0
    alpha: float = 0.1          # variance-floor weight
    beta: float = 0.15          # covariance weight
    mse_weight: float = 1.0     # node invariance MSE
    gamma: float = 0.2
    var_eps: float = 1e-6
    tau: float = 5.0
    mask_p: float = 0.02
    keep_ratio: float = 0.85
    mmd_sigmas: tuple[float, ...] = (0.5, 1.0, 2.0)
    mmd_cap: int = 4096
    max_epochs: int = 400
    patience: int = 6
    min_delta: float = 1e-3
    ema_decay: float = 0.9
    steps_per_epoch: int = 1
    lr: float = 1e-3
    weight_decay: float = 1e-5
    clip: float = 1.0
    phi_dim: int = 16
    normalize_edges: bool = True
    # ablation switches
    var_floor: bool = True
    cov: bool = True
    edge_head: bool = True
    predictors: bool = True
    feat_mask: bool = True
    drop_edge: bool = True

    def __post_init__(self):
        if self.depth < 1 or self.hidden < 1 or self.emb_dim < 2:
            raise ValueError("depth, hidden must be >= 1 and emb_dim >= 2")
        if not 0.0 <= self.mask_p < 1.0 or not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError("mask_p must lie in [0, 1) and keep_ratio in (0, 1]")
        if self.tau <= 0 or self.mmd_cap < 2:
            raise ValueError("tau must be positive and mmd_cap >= 2")

    def replace(self, **kw) -> "ModelConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mmd_sigmas"] = list(self.mmd_sigmas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown ModelConfig fields: {sorted(unknown)}")
        d = dict(d)
        if "mmd_sigmas" in d:
            d["mmd_sigmas"] = tuple(float(s) for s in d["mmd_sigmas"])
        return cls(**d)

    @property
    def effective_mask_p(self) -> float:
        return self.mask_p if self.feat_mask else 0.0

    @property
    def effective_keep(self) -> float:
        return self.keep_ratio if self.drop_edge else 1.0


VARIANTS: dict[str, dict] = {
    "FULL": {},
    "NO_EDGESET": {"lambda_e": 0.0},
    "NO_VARFLOOR": {"var_floor": False},
    "NO_COV": {"cov": False},
    "NO_EDGE_HEAD": {"edge_head": False},
    "NO_PREDICTORS": {"predictors": False},
    "NO_FEAT_MASK": {"feat_mask": False},
    "NO_DROPEDGE": {"drop_edge": False},
    "NO_EDGE_NORM": {"normalize_edges": False},
}


def variant(cfg: ModelConfig, name: str) -> ModelConfig:
    if name not in VARIANTS:
        raise KeyError(f"unknown ablation variant {name!r}")
    return cfg.replace(**VARIANTS[name])


GRID_AXES = {
    "hidden": (64, 128),
    "depth": (2, 3),
    "emb_dim": (32, 64),
    "lambda_e": (0.5, 1.0, 2.5),
}


def tuning_grid(base: ModelConfig | None = None) -> list[ModelConfig]:
    """The 24 Stage-1 configurations in a fixed order (hidden, depth, emb_dim, lambda_e)."""
    base = base or ModelConfig()
    keys = list(GRID_AXES)
    return [base.replace(**dict(zip(keys, combo)))
            for combo in itertools.product(*GRID_AXES.values())]
