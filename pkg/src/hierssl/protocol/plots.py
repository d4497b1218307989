"""SVG figures. The hash salt and missing date keep the files byte-stable."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import loss_curve_rows  # noqa: E402

_RC = {"svg.hashsalt": "hierssl", "svg.fonttype": "none", "font.size": 9}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def loss_curves(path, history: list[dict], cfg: dict) -> Path:
    rows = np.array(loss_curve_rows(history, cfg), dtype=np.float64).reshape(-1, 6)
    with plt.rc_context(_RC):
        fig, (ax, ax2) = plt.subplots(1, 2, figsize=(8, 3))
        for j, name in ((1, "total"), (2, "simsiam"), (3, "mmd"), (4, "reg")):
            ax.plot(rows[:, 0], rows[:, j], label=name)
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend(frameon=False)
        ax2.plot(rows[:, 0], rows[:, 5], color="k")
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("grad norm (pre-clip)")
        fig.tight_layout()
        return _save(fig, Path(path))


def confusion(path, s3: dict) -> Path:
    labels = s3["labels"]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(7, 3.2))
        for ax, name in zip(axes, ("ours", "baseline")):
            m = np.array(s3[name]["confusion"])
            ax.imshow(m, cmap="Blues")
            for i in range(len(labels)):
                for j in range(len(labels)):
                    ax.text(j, i, str(m[i, j]), ha="center", va="center")
            ax.set_xticks(range(len(labels)), labels)
            ax.set_yticks(range(len(labels)), labels)
            ax.set_xlabel("predicted K")
            ax.set_ylabel("true K")
            ax.set_title(f"{name}: acc {s3[name]['accuracy']:.3f}")
        fig.tight_layout()
        return _save(fig, Path(path))


def ablation_bars(path, s4: dict) -> Path:
    grid = s4["grid"]
    names = [r["variant"] for r in grid]
    x = np.arange(len(names))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 3.2))
        for k, (task, label) in enumerate((("link", "link AUC"), ("node", "node F1"), ("subgraph", "subgraph R2"))):
            ax.bar(x + (k - 1) * 0.27, [r[task] for r in grid], width=0.27, label=label)
        ax.set_xticks(x, names, rotation=30, ha="right")
        ax.axhline(0, color="k", lw=0.5)
        ax.legend(frameon=False, ncol=3)
        fig.tight_layout()
        return _save(fig, Path(path))
