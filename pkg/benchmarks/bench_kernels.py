"""Compiled vs pure-Python kernel backends on a default-size synthetic graph.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--seed 0]

Checks that both backends agree, then prints the best-of-``repeat`` wall time
per kernel and the speedup.
"""
import argparse
import time

import numpy as np

from hierssl import kernels
from hierssl.synthgen import GenConfig, generate_graph


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(seed):
    g = generate_graph(GenConfig(), seed)
    indptr, indices = g.csr
    n = g.n_nodes
    rng = np.random.default_rng(seed)
    us, vs = rng.integers(0, n, 20000), rng.integers(0, n, 20000)
    srcs = np.arange(n)
    x, y = rng.normal(size=(2048, 64)), rng.normal(size=(2048, 64))
    sig = (0.5, 1.0, 2.0)
    return g, [
        ("bfs_distance_sums (all sources)", lambda: kernels.bfs_distance_sums(indptr, indices, srcs)),
        ("triangle_counts", lambda: kernels.triangle_counts(indptr, indices)),
        ("common_neighbor_counts (20k pairs)", lambda: kernels.common_neighbor_counts(indptr, indices, us, vs)),
        ("rbf_block 2048x2048x64", lambda: kernels.rbf_block(x, y, sig)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    g, work = cases(args.seed)
    print(f"graph: N={g.n_nodes} M={g.n_edges}; backends: {', '.join(backends)}")
    print(f"{'kernel':38s}" + "".join(f"{b:>12s}" for b in backends) + "   speedup")
    prev = kernels.BACKEND
    try:
        for name, fn in work:
            times, outs = [], []
            for b in backends:
                kernels.use_backend(b)
                t, out = best_time(fn, args.repeat)
                times.append(t)
                outs.append(out)
            for o in outs[1:]:
                a, c = (outs[0][0], o[0]) if isinstance(o, tuple) else (outs[0], o)
                if not np.allclose(a, c, rtol=1e-10, atol=1e-9):
                    raise SystemExit(f"backends disagree on {name}")
            speed = times[backends.index("python")] / times[0] if len(times) > 1 else 1.0
            print(f"{name:38s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times) + f"   {speed:6.1f}x")
    finally:
        kernels.use_backend(prev)


if __name__ == "__main__":
    main()
