"""Training loop with EMA early stopping, frozen embedding, checkpoints and history export."""
from __future__ import annotations

import csv
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..graphcore.graph import MultiplexGraph
from ..numcore import tape as T
from ..numcore.optim import AdamState, NonFiniteGradientError, adam_step, clip_global_norm, global_norm
from ..synthgen.config import substream
from .config import ModelConfig
from .losses import TERMS, NonFiniteLossError, total_loss
from .model import augment, base_view, edge_embedding, forward, init_params, standardize_features

HISTORY_FIELDS = ("epoch", "total") + TERMS + ("grad_norm", "grad_norm_clipped", "ema")


class TrainingDiverged(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass
class TrainResult:
    params: dict
    history: list[dict]
    best_epoch: int
    stopped_early: bool
    config: ModelConfig
    seed: int
    extra: dict = field(default_factory=dict)


def loss_and_grads(params, va, vb, cfg, rng):
    tape = T.Tape()
    try:
        v = tape.params(params)
        loss, breakdown = total_loss(v, va, vb, cfg, rng)
        return breakdown, T.backward(tape, loss)
    finally:
        tape.release()


def train(g: MultiplexGraph, cfg: ModelConfig, seed: int, max_epochs: int | None = None,
          init: dict | None = None) -> TrainResult:
    """SSL pre-training on one graph; returns the params with the best EMA-smoothed loss.

    Stops once the smoothed loss has not improved by more than ``min_delta``
    for ``patience`` consecutive epochs.
    """
    max_epochs = cfg.max_epochs if max_epochs is None else max_epochs
    params = {k: v.copy() for k, v in (init or init_params(cfg, seed, g.features.shape[1])).items()}
    state = AdamState.for_params(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    x_std = standardize_features(g.features)
    history: list[dict] = []
    best, best_params, best_epoch, wait = np.inf, params, 0, 0
    ema = None
    stopped = False
    for epoch in range(1, max_epochs + 1):
        for step in range(cfg.steps_per_epoch):
            va = augment(g, substream(seed, "view", epoch, step, "A"), cfg, x_std)
            vb = augment(g, substream(seed, "view", epoch, step, "B"), cfg, x_std)
            try:
                breakdown, grads = loss_and_grads(params, va, vb, cfg,
                                                  substream(seed, "mmd", epoch, step))
                gn = global_norm(grads)
                clipped = clip_global_norm(grads, cfg.clip)
            except (NonFiniteLossError, NonFiniteGradientError) as e:
                raise TrainingDiverged(f"epoch {epoch}: {e}", history) from e
            params = adam_step(params, clipped, state)
        ema = breakdown["total"] if ema is None else cfg.ema_decay * ema + (1 - cfg.ema_decay) * breakdown["total"]
        row = {"epoch": epoch, **breakdown, "grad_norm": gn,
               "grad_norm_clipped": global_norm(clipped), "ema": ema}
        history.append(row)
        if ema < best - cfg.min_delta:
            best, best_params, best_epoch, wait = ema, params, epoch, 0
        else:
            wait += 1
            if wait >= cfg.patience:
                stopped = True
                break
    return TrainResult(params=best_params, history=history, best_epoch=best_epoch,
                       stopped_early=stopped, config=cfg, seed=seed)


# -- frozen embeddings ----------------------------------------------------------

@dataclass
class EmbeddingSet:
    z_v: np.ndarray
    z_uv: np.ndarray | None      # aligned with the base edge list; None without an edge head
    z_g: np.ndarray
    h: np.ndarray                # final backbone states, for pair queries
    edges: np.ndarray
    params: dict
    config: ModelConfig

    def pair_embeddings(self, pairs: np.ndarray) -> np.ndarray:
        """Zero-attribute edge embeddings for arbitrary node pairs.

        Without an edge head this falls back to endpoint concatenation [h_u; h_v].
        """
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if not self.config.edge_head:
            return np.concatenate([self.h[pairs[:, 0]], self.h[pairs[:, 1]]], axis=1)
        tape = T.Tape()
        v = {k: tape.const(p) for k, p in self.params.items()}
        return edge_embedding(v, tape.const(self.h), pairs, None).value

    def edge_features(self) -> np.ndarray:
        """z_uv for base edges, or [h_u; h_v] when the edge head is ablated."""
        if self.z_uv is not None:
            return self.z_uv
        return np.concatenate([self.h[self.edges[:, 0]], self.h[self.edges[:, 1]]], axis=1)


def embed(g: MultiplexGraph, params: dict, cfg: ModelConfig) -> EmbeddingSet:
    """Eval mode: no augmentation, sigmoid-normalized readout, true edge attributes."""
    tape = T.Tape()
    v = {k: tape.const(p) for k, p in params.items()}
    out = forward(v, base_view(g), cfg, "eval")
    emb = EmbeddingSet(z_v=out.z_n.value, z_uv=None if out.z_e is None else out.z_e.value,
                       z_g=out.z_g.value.ravel(), h=out.h.value, edges=g.edges,
                       params=params, config=cfg)
    tape.release()
    return emb


# -- persistence ----------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, result: TrainResult) -> Path:
    """Zip of raw .npy arrays plus a JSON header (config, seed, history); byte-stable."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"version": CHECKPOINT_VERSION, "config": result.config.to_dict(), "seed": result.seed,
            "best_epoch": result.best_epoch, "stopped_early": result.stopped_early,
            "rng": {"kind": "substream", "seed": result.seed, "epochs_run": len(result.history)},
            "history": result.history, "params": sorted(result.params)}
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        zf.writestr(zipfile.ZipInfo("meta.json", (1980, 1, 1, 0, 0, 0)),
                    json.dumps(meta, sort_keys=True))
        for name in sorted(result.params):
            buf = io.BytesIO()
            np.save(buf, result.params[name], allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"params/{name}.npy", (1980, 1, 1, 0, 0, 0)), buf.getvalue())
    return path


def load_checkpoint(path) -> TrainResult:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        params = {n: np.load(io.BytesIO(zf.read(f"params/{n}.npy")), allow_pickle=False)
                  for n in meta["params"]}
    return TrainResult(params=params, history=meta["history"], best_epoch=meta["best_epoch"],
                       stopped_early=meta["stopped_early"],
                       config=ModelConfig.from_dict(meta["config"]), seed=meta["seed"])


def write_history(path, history: list[dict]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_FIELDS)
        for row in history:
            w.writerow([row["epoch"]] + [repr(float(row[k])) for k in HISTORY_FIELDS[1:]])
    return path
