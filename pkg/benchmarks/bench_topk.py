#!/usr/bin/env python3
"""Compare the numba and numpy cosine-scan kernels on synthetic indexes.

The retrieval path is an exact full scan, so the kernel is the hot loop:
score every stored vector against the query, then rank. This reports the
per-query scan time for both backends at a few index sizes.

Run: python benchmarks/bench_topk.py [--sizes 1000,10000,50000] [--dim 384]
"""

import argparse
import time

import numpy as np

from subhop.kernels import cosine_scores_numpy

try:
    from subhop.kernels import cosine_scores_numba

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def bench(fn, matrix, norms, queries, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for q in queries:
            fn(matrix, norms, q, float(np.linalg.norm(q)))
        best = min(best, (time.perf_counter() - start) / len(queries))
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="1000,10000,50000")
    parser.add_argument("--dim", type=int, default=384)
    parser.add_argument("--queries", type=int, default=20)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = np.random.default_rng(0)
    print(f"dim={args.dim}, {args.queries} queries per point, best of 3\n")
    header = f"{'rows':>8}  {'numpy (ms)':>12}  {'numba (ms)':>12}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for size in sizes:
        matrix = rng.normal(size=(size, args.dim))
        norms = np.linalg.norm(matrix, axis=1)
        queries = [rng.normal(size=args.dim) for _ in range(args.queries)]
        t_np = bench(cosine_scores_numpy, matrix, norms, queries)
        if HAVE_NUMBA:
            cosine_scores_numba(matrix[:2], norms[:2], queries[0],
                                float(np.linalg.norm(queries[0])))  # JIT warm-up
            t_nb = bench(cosine_scores_numba, matrix, norms, queries)
            print(f"{size:>8}  {t_np * 1e3:>12.3f}  {t_nb * 1e3:>12.3f}  "
                  f"{t_np / t_nb:>8.2f}x")
        else:
            print(f"{size:>8}  {t_np * 1e3:>12.3f}  {'n/a':>12}  {'n/a':>8}")
    if not HAVE_NUMBA:
        print("\nnumba not installed; only the numpy fallback was measured")
    print("\nselect the backend at runtime with SUBHOP_KERNEL=numpy|numba|auto")


if __name__ == "__main__":
    main()
