"""Report emission: delimited tables, summaries, embedding dumps, SVG plots.

Everything written here is a pure function of the stage results, so reruns
produce byte-identical files (no timestamps; fixed SVG hash salt).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

LOSS_CURVE_FIELDS = ("epoch", "total", "simsiam", "mmd", "reg", "grad_norm")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6f}"


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    return path


def marker(p: float, diff: float) -> str:
    """Table markers for a method significantly below the best baseline."""
    if diff >= 0:
        return ""
    if p < 0.001:
        return "†"
    if p < 0.01:
        return "*"
    return ""


def loss_curve_rows(history: list[dict], cfg: dict) -> list[list]:
    """epoch, total, simsiam (sum of predictor terms), mmd, reg (weighted var + cov + mse), grad_norm."""
    out = []
    for h in history:
        simsiam = h["simsiam_node"] + h["simsiam_edge"] + h["simsiam_graph"]
        reg = cfg["alpha"] * h["var"] + cfg["beta"] * h["cov"] + cfg["mse_weight"] * h["mse"]
        out.append([int(h["epoch"]), h["total"], simsiam, h["mmd"], reg, h["grad_norm"]])
    return out


def write_stage1(out: Path, s1: dict) -> list[Path]:
    rows = []
    for r in s1["rows"]:
        c = r["config"]
        rows.append([r["index"], c["hidden"], c["depth"], c["emb_dim"], c["lambda_e"],
                     r["val"]["node"], r["val"]["link"], r["val"]["subgraph"], r["composite"],
                     r["epochs"], "yes" if r["index"] == s1["winner_index"] else ""])
    return [_write_csv(out / "stage1_grid.csv",
                       ("config", "hidden", "depth", "emb_dim", "lambda_e", "val_node_f1",
                        "val_link_auc", "val_subgraph_r2", "composite", "epochs", "winner"), rows)]


TASK_LABEL = {"link": "Link Pred", "node": "Node Cls", "subgraph": "Subgr Reg"}


def write_stage2(out: Path, s2: dict) -> list[Path]:
    paths = []
    table = []
    md = ["| Task | Method | Metric | Score | 95% CI | p |", "|---|---|---|---|---|---|"]
    for r in s2["rows"]:
        ci = f"[{r['ci_low']:.3f}, {r['ci_high']:.3f}]" if "ci_low" in r else ""
        p = f"{r['p']:.4f}" if "p" in r else ""
        mk = marker(r["p"], _sig_diff(s2, r["task"])) if "p" in r else ""
        table.append([TASK_LABEL[r["task"]], r["method"], r["metric"], r["score"], ci, p, mk])
        md.append(f"| {TASK_LABEL[r['task']]} | {r['method']} | {r['metric']} | {r['score']:.3f}{mk} | {ci} | {p} |")
    paths.append(_write_csv(out / "table1.csv", ("Task", "Method", "Metric", "Score", "CI", "p", "marker"), table))
    md.append("")
    md.append("† p<0.001, * p<0.01: significantly below the best baseline (paired bootstrap, "
              f"n={s2['significance'][0]['n']}, alpha={s2['significance'][0]['alpha']}).")
    (out / "table1.md").write_text("\n".join(md) + "\n")
    paths.append(out / "table1.md")
    paths.append(_write_csv(out / "significance.csv",
                            ("task", "ours", "baseline", "diff", "ci_low", "ci_high", "p", "n", "alpha"),
                            [[s["task"], s["ours"], s["baseline"], s["diff"], s["ci_low"], s["ci_high"],
                              s["p"], int(s["n"]), s["alpha"]] for s in s2["significance"]]))
    paths.append(_write_csv(out / "loss_curve.csv", LOSS_CURVE_FIELDS,
                            loss_curve_rows(s2["history"], s2["config"])))
    keys = list(s2["history"][0]) if s2["history"] else []
    paths.append(_write_csv(out / "history.csv", keys, [[h[k] for k in keys] for h in s2["history"]]))
    return paths


def _sig_diff(s2, task):
    for s in s2["significance"]:
        if s["task"] == task:
            return s["diff"]
    return 0.0


def write_embeddings(out: Path, z_v: np.ndarray, labels, community) -> Path:
    header = ["node", "label", "community"] + [f"z{i}" for i in range(z_v.shape[1])]
    rows = [[i, int(labels[i]), int(community[i]), *z_v[i]] for i in range(len(z_v))]
    return _write_csv(out / "embeddings_nodes.csv", header, rows)


def write_stage3(out: Path, s3: dict) -> list[Path]:
    labels = s3["labels"]
    paths = []
    for name in ("ours", "baseline"):
        rows = [[str(k)] + s3[name]["confusion"][i] for i, k in enumerate(labels)]
        paths.append(_write_csv(out / f"confusion_{name}.csv", ["true\\pred"] + [str(k) for k in labels], rows))
    paths.append(_write_csv(out / "transfer.csv", ("method", "accuracy", "n_train", "n_test"),
                            [[m, s3[m]["accuracy"], len(s3["train"]), len(s3["test"])]
                             for m in ("ours", "baseline")]
                            + [["majority", s3["majority_accuracy"], len(s3["train"]), len(s3["test"])]]))
    g0 = s3["graphs"][0]
    header = ["seed", "K"] + [f"z{i}" for i in range(len(g0["z_g"]))]
    paths.append(_write_csv(out / "embeddings_graphs.csv", header,
                            [[g["seed"], g["K"], *g["z_g"]] for g in s3["graphs"]]))
    return paths


def write_stage4(out: Path, s4: dict) -> list[Path]:
    return [
        _write_csv(out / "ablation.csv", ("variant", "link_auc", "node_f1", "subgraph_r2"),
                   [[r["variant"], r["link"], r["node"], r["subgraph"]] for r in s4["grid"]]),
        _write_csv(out / "ablation_runs.csv", ("variant", "seed", "link_auc", "node_f1", "subgraph_r2", "epochs"),
                   [[r["variant"], int(r["seed"]), r["scores"]["link"], r["scores"]["node"],
                     r["scores"]["subgraph"], int(r["epochs"])] for r in s4["runs"]]),
    ]


def write_summary(out: Path, stages: dict) -> Path:
    doc = {}
    if "tune" in stages:
        s1 = stages["tune"]
        doc["winner"] = {k: s1["winner"][k] for k in ("hidden", "depth", "emb_dim", "lambda_e")}
        doc["winner_composite"] = round(s1["rows"][s1["winner_index"]]["composite"], 6)
    if "probe" in stages:
        doc["table1"] = [{k: (round(v, 6) if isinstance(v, float) else v) for k, v in r.items()}
                         for r in stages["probe"]["rows"]]
    if "transfer" in stages:
        s3 = stages["transfer"]
        doc["transfer"] = {m: round(s3[m]["accuracy"], 6) for m in ("ours", "baseline")}
    if "ablate" in stages:
        doc["ablation"] = [{k: (round(v, 6) if isinstance(v, float) else v) for k, v in r.items()}
                           for r in stages["ablate"]["grid"]]
    path = out / "summary.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def emit(out_dir, stages: dict, extras: dict | None = None) -> list[Path]:
    """Write every report for the stages present in ``stages`` (keyed by stage name)."""
    from . import plots

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if "tune" in stages:
        paths += write_stage1(out, stages["tune"])
    if "probe" in stages:
        paths += write_stage2(out, stages["probe"])
        paths.append(plots.loss_curves(out / "loss_curve.svg", stages["probe"]["history"],
                                       stages["probe"]["config"]))
    if extras and "embeddings" in extras:
        z, labels, community = extras["embeddings"]
        paths.append(write_embeddings(out, z, labels, community))
    if "transfer" in stages:
        paths += write_stage3(out, stages["transfer"])
        paths.append(plots.confusion(out / "confusion.svg", stages["transfer"]))
    if "ablate" in stages:
        paths += write_stage4(out, stages["ablate"])
        paths.append(plots.ablation_bars(out / "ablation.svg", stages["ablate"]))
    paths.append(write_summary(out, stages))
    return paths
