#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--sizes 200,500,1000]

The dispatching wrappers in crossdoc._kernels pick numba when available
(CROSSDOC_NUMBA=0 forces numpy); this script times both implementations
directly, so it reports the real cost of choosing either path.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from crossdoc import _kernels


def timeit(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_cosine(n: int, d: int = 256):
    rng = np.random.default_rng(0)
    a = rng.normal(size=(n, d))
    b = rng.normal(size=(n, d))
    rows = [("cosine_matrix", f"{n}x{d}", timeit(_kernels.cosine_matrix_np, a, b))]
    if _kernels.njit is not None:
        _kernels._cosine_matrix_jit(a[:2], b[:2])  # compile outside the timer
        rows.append(("cosine_matrix[numba]", f"{n}x{d}", timeit(_kernels._cosine_matrix_jit, a, b)))
    return rows


def bench_sweep(n: int):
    rng = np.random.default_rng(1)
    sims = rng.uniform(-1, 1, n)
    gold = rng.integers(0, 2, n).astype(np.int64)
    thresholds = np.round(0.30 + 0.01 * np.arange(51), 10)
    rows = [("sweep_accuracy", f"{n} pairs x 51 t", timeit(_kernels.sweep_accuracy_np, sims, gold, thresholds))]
    if _kernels.njit is not None:
        _kernels._sweep_accuracy_jit(sims[:4], gold[:4], thresholds)
        rows.append(
            ("sweep_accuracy[numba]", f"{n} pairs x 51 t", timeit(_kernels._sweep_accuracy_jit, sims, gold, thresholds))
        )
    return rows


def bench_agglomerate(n: int):
    rng = np.random.default_rng(2)
    m = rng.uniform(0, 1, size=(n, n))
    m = (m + m.T) / 2
    np.fill_diagonal(m, 0.0)
    ranks = np.arange(n, dtype=np.int64)
    rows = [("agglomerate", f"{n}x{n}", timeit(_kernels.agglomerate_np, m, 0.7, ranks, 0, repeats=3))]
    if _kernels.njit is not None:
        _kernels._agglomerate_jit(m[:3, :3].copy(), 0.7, ranks[:3], 0)
        rows.append(("agglomerate[numba]", f"{n}x{n}", timeit(_kernels._agglomerate_jit, m, 0.7, ranks, 0, repeats=3)))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,500,1000")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"active backend: {_kernels.backend()}")
    print(f"{'kernel':<24} {'shape':<18} {'best of n (s)':>14}")
    print("-" * 58)
    for n in sizes:
        rows = bench_cosine(n) + bench_sweep(n * n // 4) + bench_agglomerate(min(n, 600))
        for name, shape, seconds in rows:
            print(f"{name:<24} {shape:<18} {seconds:>14.6f}")
        print("-" * 58)


if __name__ == "__main__":
    main()
