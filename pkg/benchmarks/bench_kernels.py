#!/usr/bin/env python3
"""Time the numba kernel lane against the pure-numpy fallback.

Shapes mirror real training batches. Run after an initial warmup call so
JIT compilation is excluded. ``LOBTREND_DISABLE_NUMBA=1`` does not affect
this script: both lanes are imported explicitly when numba is available.

Usage:
    python benchmarks/bench_kernels.py [--repeats 10]
"""

import argparse
import time

import numpy as np

from lobtrend.nncore import kernels as K


def timeit(fn, *args, repeats=10):
    fn(*args)  # warmup / JIT
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_conv(repeats):
    rng = np.random.default_rng(0)
    cases = [("cnn layer1 (B16,T300,F41 -> S16,D10)", (16, 300, 41), (16, 10)),
             ("cnn-lstm layer (B16,T300,F41 -> S16,D5)", (16, 300, 41), (16, 5)),
             ("deep layer (B16,T300,C32 -> S32,D4)", (16, 300, 32), (32, 4))]
    rows = []
    for name, (B, T, N), (S, D) in cases:
        x = rng.standard_normal((B, T, N)).astype(np.float32)
        w = rng.standard_normal((S, D, N)).astype(np.float32)
        b = np.zeros(S, np.float32)
        dy = rng.standard_normal((B, T, S)).astype(np.float32)
        row = {"op": f"conv fwd  {name}",
               "numpy": timeit(K.conv1d_forward_numpy, x, w, b, repeats=repeats)}
        if K.HAVE_NUMBA:
            row["numba"] = timeit(K.conv1d_forward_numba, x, w, b, repeats=repeats)
        rows.append(row)
        row = {"op": f"conv bwd  {name}",
               "numpy": timeit(K.conv1d_backward_numpy, x, w, dy, repeats=repeats)}
        if K.HAVE_NUMBA:
            row["numba"] = timeit(K.conv1d_backward_numba, x, w, dy, repeats=repeats)
        rows.append(row)
    return rows


def bench_lstm(repeats):
    rng = np.random.default_rng(1)
    T, B, N, H = 300, 16, 41, 32
    x = np.ascontiguousarray(rng.standard_normal((T, B, N)).astype(np.float32))
    w_in = rng.standard_normal((N, 3 * H)).astype(np.float32) * 0.1
    w_rec = rng.standard_normal((H, 3 * H)).astype(np.float32) * 0.1
    bg = np.zeros(3 * H, np.float32)
    w_os = rng.standard_normal((H, H)).astype(np.float32) * 0.1
    w_or = rng.standard_normal((H, H)).astype(np.float32) * 0.1
    bo = np.zeros(H, np.float32)
    dh = np.ascontiguousarray(rng.standard_normal((T, B, H)).astype(np.float32))
    fwd_args = (x, w_in, w_rec, bg, w_os, w_or, bo, True)
    rows = [{"op": f"lstm fwd  (T{T},B{B},N{N},H{H})",
             "numpy": timeit(K.lstm_forward_numpy, *fwd_args, repeats=repeats)}]
    if K.HAVE_NUMBA:
        rows[-1]["numba"] = timeit(K.lstm_forward_numba, *fwd_args, repeats=repeats)
    caches = K.lstm_forward_numpy(*fwd_args)
    bwd_args = fwd_args[:8] + caches + (dh,)
    rows.append({"op": f"lstm bwd  (T{T},B{B},N{N},H{H})",
                 "numpy": timeit(K.lstm_backward_numpy, *bwd_args, repeats=repeats)})
    if K.HAVE_NUMBA:
        rows[-1]["numba"] = timeit(K.lstm_backward_numba, *bwd_args, repeats=repeats)
    return rows


def bench_dense(repeats):
    rng = np.random.default_rng(2)
    cases = [("temporal head (4800x32 -> 3)", (4800, 32, 3)),
             ("mlp fc1 (64x2050 -> 128)", (64, 2050, 128))]
    rows = []
    for name, (M, KD, N) in cases:
        x = rng.standard_normal((M, KD)).astype(np.float32)
        w = rng.standard_normal((KD, N)).astype(np.float32)
        b = np.zeros(N, np.float32)
        row = {"op": f"dense strict fwd  {name}",
               "numpy": timeit(K.dense_forward_strict_numpy, x, w, b, repeats=repeats)}
        if K.HAVE_NUMBA:
            row["numba"] = timeit(K.dense_forward_strict_numba, x, w, b,
                                  repeats=repeats)
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=10)
    args = ap.parse_args()

    print(f"numba available: {K.HAVE_NUMBA}")
    rows = bench_conv(args.repeats) + bench_lstm(args.repeats) + bench_dense(args.repeats)
    width = max(len(r["op"]) for r in rows)
    header = f"{'kernel':<{width}}  {'numpy (ms)':>11}  {'numba (ms)':>11}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for r in rows:
        np_ms = r["numpy"] * 1e3
        if "numba" in r:
            nb_ms = r["numba"] * 1e3
            print(f"{r['op']:<{width}}  {np_ms:>11.3f}  {nb_ms:>11.3f}  "
                  f"{np_ms / nb_ms:>7.2f}x")
        else:
            print(f"{r['op']:<{width}}  {np_ms:>11.3f}  {'-':>11}  {'-':>8}")


if __name__ == "__main__":
    main()
