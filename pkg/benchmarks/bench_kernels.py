#!/usr/bin/env python3
"""Compare the compiled cache-scoring kernel against the numpy fallback.

The fused form (eta over label * similarity) is the pipeline's hot loop:
the fallback must materialize an (instances, cache, attributes) block,
while the extension streams over cache entries. Run:

    python benchmarks/bench_kernels.py [--instances N] [--cache C] [--attrs A]
"""

import argparse
import time

import numpy as np

from comca import _kernels
from comca._kernels import fallback


def bench(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--instances", type=int, default=2000)
    ap.add_argument("--cache", type=int, default=1872)  # 117 attrs x 16
    ap.add_argument("--attrs", type=int, default=117)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    sim = rng.uniform(-1, 1, size=(args.instances, args.cache))
    labels = rng.uniform(0, 1, size=(args.cache, args.attrs))

    print(f"shape: {args.instances} instances x {args.cache} cache entries "
          f"x {args.attrs} attributes")
    print(f"extension built: {_kernels.HAVE_EXT}")

    for label_as_weight, tag in ((False, "eta(label*sim)  [fused]"),
                                 (True, "label*eta(sim) [matmul]")):
        t_np, out_np = bench(fallback.cache_scores, sim, labels, -1.0, 1.0,
                             label_as_weight, repeats=args.repeats)
        line = f"{tag}:  numpy {t_np * 1e3:8.1f} ms"
        if _kernels.HAVE_EXT:
            t_cy, out_cy = bench(_kernels._ext.cache_scores, sim, labels,
                                 -1.0, 1.0, label_as_weight,
                                 repeats=args.repeats)
            diff = float(np.abs(out_cy - out_np).max())
            line += (f"   cython {t_cy * 1e3:8.1f} ms"
                     f"   speedup x{t_np / t_cy:5.2f}   max|diff| {diff:.2e}")
        print(line)


if __name__ == "__main__":
    main()
