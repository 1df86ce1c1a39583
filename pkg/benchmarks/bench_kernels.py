"""Compare the compiled and pure-Python curvature kernels on one SBM sample.

Usage: python benchmarks/bench_kernels.py [--n 60] [--p0 0.5] [--p1 0.25] [--edges 300]
"""
import argparse
import time

import numpy as np

from ricci_sbm import _backend
from ricci_sbm.curvature import curvature_all_edges
from ricci_sbm.pipeline import sample_edges
from ricci_sbm.sbm import SbmParams, sample_sbm


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--p0", type=float, default=0.5)
    ap.add_argument("--p1", type=float, default=0.25)
    ap.add_argument("--edges", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    g, _ = sample_sbm(SbmParams(args.n, args.p0, args.p1, seed=1))
    idx = sample_edges(g, args.edges, 1)
    g.two_hop_distances  # build the cache outside the timed region
    print(f"graph: {g.n_vertices} vertices, {g.n_edges} edges; timing {idx.size} edges")
    results = {}
    for name, kern in (("cython", _backend.compiled), ("python", _backend.pure)):
        if kern is None:
            print(f"{name:>7}: unavailable")
            continue
        sec, val = timed(lambda: curvature_all_edges(g, edges=idx, kernels=kern), args.repeat)
        results[name] = (sec, val)
        print(f"{name:>7}: {sec:8.3f} s  ({1e3 * sec / idx.size:.3f} ms/edge)")
    if len(results) == 2:
        (tc, vc), (tp, vp) = results["cython"], results["python"]
        print(f"speedup: {tp / tc:.1f}x   max |diff| = {np.abs(vc - vp).max():.2e}")


if __name__ == "__main__":
    main()
