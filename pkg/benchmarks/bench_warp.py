"""Benchmark the bilinear sampling kernel: compiled extension vs numpy.

Runs the same (values, d/du, d/dv) sampling workload through both backends
and reports per-call timings plus the speedup. The two backends are also
checked for exact agreement on the benchmark inputs.

Usage: python3 benchmarks/bench_warp.py [--size 256] [--repeats 50]
"""

import argparse
import time

import numpy as np

from egodepth.kernels import available_backends
from egodepth.kernels._bilinear_np import bilinear_sample_grad as sample_np

try:
    from egodepth.kernels._bilinear_fast import bilinear_sample_grad as sample_fast
except ImportError:
    sample_fast = None


def make_inputs(size: int, channels: int, rng):
    source = rng.uniform(0.0, 1.0, size=(size, size, channels))
    n = size * size
    u = rng.uniform(-2.0, size + 1.0, size=n)
    v = rng.uniform(-2.0, size + 1.0, size=n)
    return source, u, v


def bench(fn, source, u, v, repeats: int) -> float:
    fn(source, u, v)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(source, u, v)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--channels", type=int, default=1, choices=[1, 3])
    args = parser.parse_args()

    print(f"available backends: {', '.join(available_backends())}")
    rng = np.random.default_rng(0)
    source, u, v = make_inputs(args.size, args.channels, rng)

    t_np = bench(sample_np, source, u, v, args.repeats)
    print(f"numpy    : {t_np * 1e3:8.3f} ms/call "
          f"({args.size}x{args.size}x{args.channels}, {len(u)} samples)")

    if sample_fast is None:
        print("compiled : not built")
        return

    t_fast = bench(sample_fast, source, u, v, args.repeats)
    print(f"compiled : {t_fast * 1e3:8.3f} ms/call")
    print(f"speedup  : {t_np / t_fast:.2f}x")

    ref = sample_np(source, u, v)
    got = sample_fast(source, u, v)
    for name, r, g in zip(("values", "d/du", "d/dv"), ref, got):
        if not np.array_equal(r, g):
            raise SystemExit(f"backend mismatch in {name}")
    print("backends agree exactly on benchmark inputs")


if __name__ == "__main__":
    main()
