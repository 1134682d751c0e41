"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--points N] [--h H] [--repeat R]

Prints one JSON line per kernel with the best wall time of each backend,
the speedup and the largest disagreement between the two results.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from pinned_gl import metric, symmetric_scene
from pinned_gl.acceptance import oracle_scene


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def compare(name, make, repeat):
    t_c, v_c = best_of(lambda: make("compiled"), repeat)
    t_p, v_p = best_of(lambda: make("python"), repeat)
    return {"kernel": name, "compiled_s": round(t_c, 4), "python_s": round(t_p, 4),
            "speedup": round(t_p / t_c, 2), "max_abs_diff": float(np.max(np.abs(v_c - v_p)))}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    scene, sing = symmetric_scene()
    pts = rng.uniform(-1, 1, (args.points, 3))
    pts = pts[np.linalg.norm(pts, axis=1) <= 1]
    print(json.dumps(compare("distance_field", lambda be: metric.distance_field(
        scene, sing.positives[0], pts, backend=be), args.repeat)))

    osc = oracle_scene(0.6)
    targets = rng.uniform(-0.6, 0.6, (8, 3))
    print(json.dumps(compare("lattice_dijkstra", lambda be: metric.lattice_oracle_distances(
        osc, [0.7, 0.1, 0.0], targets, args.h, backend=be), 1)))


if __name__ == "__main__":
    main()
