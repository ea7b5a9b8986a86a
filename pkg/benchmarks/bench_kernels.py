#!/usr/bin/env python3
"""Benchmark the numba-jitted kernels against the pure-numpy fallbacks.

Runs each kernel on identical inputs through both paths, checks agreement,
and prints a timing table. The dispatch in the package itself is selected
by the CONCEPTRAY_DISABLE_NUMBA environment variable; here both paths are
called explicitly.

    python3 benchmarks/bench_kernels.py [--size large]
"""

import argparse
import time

import numpy as np

from conceptray import _kernels as K


def timeit(fn, *args, repeats=5):
    fn(*args)  # warm-up (includes jit compile for the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_resize(rng, big):
    src = 512 if big else 256
    dst = 64
    img = rng.uniform(0, 1, (src, src))
    t_np, out_np = timeit(K.bilinear_resize_numpy, img, dst, dst)
    t_nb, out_nb = timeit(K._bilinear_resize_jit, np.ascontiguousarray(img), dst, dst)
    assert np.array_equal(out_np, out_nb)
    return f"bilinear_resize {src}->{dst}", t_np, t_nb


def bench_nn(rng, big):
    n = 1500 if big else 600
    x = rng.normal(size=(n, 32))
    t_np, out_np = timeit(K.nearest_neighbor_indices_numpy, x, repeats=3)
    t_nb, out_nb = timeit(K._nearest_neighbor_indices_jit, np.ascontiguousarray(x), repeats=3)
    assert np.array_equal(out_np, out_nb)
    return f"nearest_neighbors n={n}", t_np, t_nb


def bench_condense(rng, big):
    n = 1200 if big else 400
    x = rng.normal(size=(n, 32))
    labels = (rng.random(n) < 0.8).astype(np.int64)
    store = (labels == 0).astype(bool)
    if not store.any():
        store[0] = True
    candidates = np.flatnonzero(labels == 1).astype(np.int64)
    t_np, out_np = timeit(K.condense_1nn_numpy, x, labels, store, candidates, repeats=3)
    t_nb, out_nb = timeit(
        K._condense_1nn_jit, np.ascontiguousarray(x), labels, store.astype(np.bool_),
        candidates, repeats=3,
    )
    assert np.array_equal(out_np, out_nb)
    return f"condense_1nn n={n}", t_np, t_nb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", choices=("small", "large"), default="small")
    args = parser.parse_args()
    big = args.size == "large"

    if not K._HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    rows = [bench_resize(rng, big), bench_nn(rng, big), bench_condense(rng, big)]
    print(f"{'kernel':32s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, t_np, t_nb in rows:
        print(f"{name:32s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")
    print("\noutputs agree on all kernels (asserted)")


if __name__ == "__main__":
    main()
