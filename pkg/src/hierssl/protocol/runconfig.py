"""Run configuration: generator, model and protocol settings from one YAML file."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..sslmodel.config import ModelConfig
from ..synthgen.config import GenConfig


@dataclass(frozen=True)
class ProtocolConfig:
    corpus_size: int = 500
    transfer_graphs: int | None = None      # None -> the whole corpus
    transfer_mode: str = "per_graph"        # "per_graph" | "shared"
    transfer_epochs: int | None = None      # None -> model max_epochs
    stage1_epochs: int | None = None
    grid_limit: int | None = None           # evaluate only the first n grid configs (smoke runs)
    ablation_seeds: int = 3
    bootstrap_n: int = 2000
    alpha: float = 0.05

    def __post_init__(self):
        if self.transfer_mode not in ("per_graph", "shared"):
            raise ValueError(f"transfer_mode must be 'per_graph' or 'shared', got {self.transfer_mode!r}")
        if self.corpus_size < 1 or self.ablation_seeds < 1 or self.bootstrap_n < 1:
            raise ValueError("corpus_size, ablation_seeds and bootstrap_n must be positive")


@dataclass(frozen=True)
class RunConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    @classmethod
    def from_dict(cls, doc: dict | None) -> "RunConfig":
        doc = doc or {}
        unknown = set(doc) - {"gen", "model", "protocol"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        proto = doc.get("protocol") or {}
        names = {f.name for f in dataclasses.fields(ProtocolConfig)}
        if set(proto) - names:
            raise ValueError(f"unknown protocol fields: {sorted(set(proto) - names)}")
        return cls(gen=GenConfig.from_dict(doc.get("gen") or {}),
                   model=ModelConfig.from_dict(doc.get("model") or {}),
                   protocol=ProtocolConfig(**proto))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"gen": self.gen.to_dict(), "model": self.model.to_dict(),
                "protocol": dataclasses.asdict(self.protocol)}
