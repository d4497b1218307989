"""Command-line entry point: ``hierssl {gen,tune,probe,transfer,ablate,report,all}``.

Layout under ``--out``:
    corpus/     graphs + manifest.csv (``gen``)
    stages/     machine-readable stage results, checkpoint, embeddings
    manifests/  one run manifest per stage (configs, seeds, inputs, outputs, timestamps, version)
    reports/    tables, summaries, embedding dumps and SVGs (``report``); byte-stable
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..sslmodel.config import ModelConfig
from ..sslmodel.train import load_checkpoint, save_checkpoint
from ..synthgen.corpus import generate_corpus, read_manifest
from . import report as report_mod
from .runconfig import RunConfig
from .stages import (
    StageError,
    reference_graph,
    stage1_tune,
    stage2_probe,
    stage3_transfer,
    stage4_ablate,
)

log = logging.getLogger("hierssl")

STAGES = ("tune", "probe", "transfer", "ablate")


class Run:
    """Paths and config of one invocation."""

    def __init__(self, args):
        self.seed = args.seed
        self.jobs = max(1, args.jobs)
        self.out = Path(args.out)
        self.config_path = args.config
        self.cfg = load_config(args.config) if args.config else RunConfig()
        self.corpus = Path(args.corpus) if args.corpus else self.out / "corpus" / "manifest.csv"
        for d in ("stages", "manifests"):
            (self.out / d).mkdir(parents=True, exist_ok=True)

    def stage_path(self, name: str) -> Path:
        return self.out / "stages" / f"{name}.json"

    def load_stage(self, name: str, needed_by: str) -> dict:
        p = self.stage_path(name)
        if not p.exists():
            raise StageError(needed_by, f"missing {p}; run `hierssl {name}` first")
        doc = json.loads(p.read_text())
        if doc.get("seed") != self.seed:
            raise StageError(needed_by, f"{p} was produced with seed {doc.get('seed')}, not {self.seed}")
        return doc

    def save_stage(self, name: str, doc: dict) -> Path:
        p = self.stage_path(name)
        p.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return p

    def winner(self, needed_by: str) -> ModelConfig:
        return ModelConfig.from_dict(self.load_stage("tune", needed_by)["winner"])

    def manifest(self, stage: str, started: str, inputs, outputs, seeds) -> Path:
        doc = {"stage": stage, "version": __version__, "config": self.cfg.to_dict(),
               "config_file": str(self.config_path) if self.config_path else None,
               "seeds": list(seeds), "inputs": [str(p) for p in inputs],
               "outputs": [str(p) for p in outputs], "started": started, "finished": _now()}
        p = self.out / "manifests" / f"{stage}.json"
        p.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return p


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def load_config(path) -> RunConfig:
    """YAML run config, or a run manifest (JSON with a ``config`` section) for reruns."""
    p = Path(path)
    if p.suffix == ".json":
        doc = json.loads(p.read_text())
        return RunConfig.from_dict(doc["config"] if "config" in doc else doc)
    return RunConfig.from_file(p)


# -- subcommands -----------------------------------------------------------------------

def cmd_gen(run: Run):
    started = _now()
    p = run.cfg.protocol
    out_dir = run.corpus.parent
    manifest = generate_corpus(run.cfg.gen, out_dir, count=p.corpus_size, base_seed=run.seed, jobs=run.jobs)
    log.info("corpus: %d graphs -> %s", p.corpus_size, manifest)
    run.manifest("gen", started, [], [manifest], range(run.seed, run.seed + p.corpus_size))


def cmd_tune(run: Run):
    started = _now()
    p = run.cfg.protocol
    ref = reference_graph(run.cfg.gen, run.seed)
    s1 = stage1_tune(ref, run.cfg.model, run.seed, epochs=p.stage1_epochs, grid_limit=p.grid_limit,
                     jobs=run.jobs)
    w = s1["winner"]
    log.info("tune: winner #%d hidden=%d depth=%d emb=%d lambda_e=%g composite=%.3f",
             s1["winner_index"], w["hidden"], w["depth"], w["emb_dim"], w["lambda_e"],
             s1["rows"][s1["winner_index"]]["composite"])
    out = run.save_stage("tune", s1)
    run.manifest("tune", started, [f"generated:seed={run.seed}"], [out], [run.seed])


def cmd_probe(run: Run):
    started = _now()
    p = run.cfg.protocol
    cfg = run.winner("probe")
    ref = reference_graph(run.cfg.gen, run.seed)
    s2, result, emb = stage2_probe(ref, cfg, run.seed, bootstrap_n=p.bootstrap_n, alpha=p.alpha)
    for r in s2["rows"]:
        log.info("probe: %-9s %-24s %s=%.4f", r["task"], r["method"], r["metric"], r["score"])
    ckpt = save_checkpoint(run.out / "stages" / "model.zip", result)
    emb_path = run.out / "stages" / "embeddings.npz"
    np.savez(emb_path, z_v=emb.z_v, z_g=emb.z_g, labels=ref.bundle.node_label,
             community=ref.graph.community)
    out = run.save_stage("probe", s2)
    run.manifest("probe", started, [run.stage_path("tune")], [out, ckpt, emb_path], [run.seed])


def cmd_transfer(run: Run):
    started = _now()
    p = run.cfg.protocol
    cfg = run.winner("transfer")
    if not run.corpus.exists():
        if run.corpus != run.out / "corpus" / "manifest.csv":
            raise StageError("transfer", f"corpus manifest {run.corpus} not found")
        log.info("transfer: no corpus yet, generating")
        cmd_gen(run)
    rows = read_manifest(run.corpus)
    if p.transfer_graphs is not None:
        rows = rows[: p.transfer_graphs]
    shared = None
    inputs = [run.corpus, run.stage_path("tune")]
    if p.transfer_mode == "shared":
        ckpt = run.out / "stages" / "model.zip"
        if not ckpt.exists():
            raise StageError("transfer", "shared mode needs the stage-2 checkpoint; run `hierssl probe` first")
        shared = load_checkpoint(ckpt).params
        inputs.append(ckpt)
    s3 = stage3_transfer(rows, cfg, run.seed, mode=p.transfer_mode, epochs=p.transfer_epochs,
                         shared_params=shared, jobs=run.jobs)
    s3["corpus"] = [Path(r["path"]).name for r in rows]
    log.info("transfer: ours %.3f baseline %.3f majority %.3f (%d graphs)", s3["ours"]["accuracy"],
             s3["baseline"]["accuracy"], s3["majority_accuracy"], len(rows))
    out = run.save_stage("transfer", s3)
    run.manifest("transfer", started, inputs + [r["path"] for r in rows], [out], [run.seed])


def cmd_ablate(run: Run):
    started = _now()
    p = run.cfg.protocol
    cfg = run.winner("ablate")
    ref = reference_graph(run.cfg.gen, run.seed)
    seeds = list(range(run.seed, run.seed + p.ablation_seeds))
    s4 = stage4_ablate(ref, cfg, seeds, jobs=run.jobs)
    s4["seed"] = run.seed
    for r in s4["grid"]:
        log.info("ablate: %-14s link=%.4f node=%.4f subgraph=%.4f", r["variant"], r["link"], r["node"], r["subgraph"])
    out = run.save_stage("ablate", s4)
    run.manifest("ablate", started, [run.stage_path("tune")], [out], seeds)


def cmd_report(run: Run):
    started = _now()
    stages = {s: json.loads(run.stage_path(s).read_text()) for s in STAGES if run.stage_path(s).exists()}
    if not stages:
        raise StageError("report", f"no stage results under {run.out / 'stages'}")
    extras = {}
    emb_path = run.out / "stages" / "embeddings.npz"
    if "probe" in stages and emb_path.exists():
        with np.load(emb_path) as z:
            extras["embeddings"] = (z["z_v"], z["labels"], z["community"])
    paths = report_mod.emit(run.out / "reports", stages, extras)
    log.info("report: %d files -> %s", len(paths), run.out / "reports")
    run.manifest("report", started, [run.stage_path(s) for s in stages], paths, [run.seed])


def cmd_all(run: Run):
    if not run.corpus.exists() and run.cfg.protocol.transfer_mode == "per_graph":
        _guard("gen", cmd_gen, run)
    for name, fn in (("tune", cmd_tune), ("probe", cmd_probe), ("transfer", cmd_transfer),
                     ("ablate", cmd_ablate), ("report", cmd_report)):
        _guard(name, fn, run)


COMMANDS = {"gen": cmd_gen, "tune": cmd_tune, "probe": cmd_probe, "transfer": cmd_transfer,
            "ablate": cmd_ablate, "report": cmd_report, "all": cmd_all}


def _guard(stage: str, fn, run: Run):
    try:
        fn(run)
    except StageError:
        raise
    except Exception as e:
        raise StageError(stage, f"{type(e).__name__}: {e}") from e


def _u64(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hierssl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hierssl {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config, or a run manifest JSON to rerun")
    common.add_argument("--seed", type=_u64, default=0, help="run seed (also the reference graph seed)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--corpus", help="corpus manifest (default OUT/corpus/manifest.csv)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    try:
        run = Run(args)
        if args.command == "all":
            cmd_all(run)
        else:
            _guard(args.command, COMMANDS[args.command], run)
    except StageError as e:
        print(f"hierssl: stage '{e.stage}' failed: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"hierssl: stage '{args.command}' failed: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
