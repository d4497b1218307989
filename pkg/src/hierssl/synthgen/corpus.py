"""Corpus generation with a delimited manifest (seed, path, N, K, M, C, L)."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..graphcore.graph import load_graph, save_graph
from ..graphcore.metrics import avg_clustering, avg_shortest_path
from .config import GenConfig
from .generator import generate_graph
from .tasks import make_task_bundle

MANIFEST_FIELDS = ("seed", "path", "N", "K", "M", "C", "L")


class CorpusError(IOError):
    pass


def _one(args):
    cfg, seed, out_dir = args
    g = generate_graph(cfg, seed)
    bundle = make_task_bundle(g, cfg, seed)
    path = Path(out_dir) / f"graph_{seed:06d}.json"
    save_graph(g, path, bundle)
    return {"seed": seed, "path": path.name, "N": g.n_nodes, "K": g.n_communities,
            "M": g.n_edges, "C": f"{avg_clustering(g):.6f}", "L": f"{avg_shortest_path(g):.6f}"}


def generate_corpus(cfg: GenConfig, out_dir, count: int = 500, base_seed: int = 0,
                    jobs: int = 1) -> Path:
    """Write ``count`` graphs (with task bundles) and ``manifest.csv``; returns the manifest path.

    Rows are written as graphs finish in seed order; on failure the manifest is
    closed with a ``# partial`` line naming the failing seed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    work = [(cfg, base_seed + i, str(out)) for i in range(count)]
    with manifest.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        w.writeheader()
        seed = base_seed
        try:
            if jobs > 1:
                with ProcessPoolExecutor(jobs) as ex:
                    for seed, row in zip(range(base_seed, base_seed + count), ex.map(_one, work)):
                        w.writerow(row)
            else:
                for item in work:
                    seed = item[1]
                    w.writerow(_one(item))
        except OSError as e:
            fh.write(f"# partial: generation stopped at seed {seed}: {e}\n")
            raise CorpusError(f"corpus generation failed at seed {seed}: {e}") from e
    return manifest


def read_manifest(path) -> list[dict]:
    path = Path(path)
    rows = []
    with path.open() as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            rows.append({"seed": int(row["seed"]), "path": str(path.parent / row["path"]),
                         "N": int(row["N"]), "K": int(row["K"]), "M": int(row["M"]),
                         "C": float(row["C"]), "L": float(row["L"])})
    return rows


def load_corpus_graph(row: dict):
    """(graph, bundle) for one manifest row."""
    return load_graph(row["path"], with_bundle=True)
