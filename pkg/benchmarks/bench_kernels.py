"""Benchmark the compiled decode kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from chansim import _kernels_py
from chansim import codespace as cs

try:
    from chansim import _kernels as compiled
except ImportError:
    compiled = None


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    rng = np.random.default_rng(0)
    book = cs.hamming74_codebook()
    binary = np.ascontiguousarray(rng.integers(0, 2, size=(200_000, 7)).astype(np.float64))
    no_erasure = np.zeros(binary.shape, dtype=np.uint8)
    yield "hamming74 decode, 200k words", (binary, no_erasure, book.vectors, 1.0)

    octagon = np.ascontiguousarray(rng.normal(size=(100_000, 2)))
    protos = np.ascontiguousarray(rng.normal(size=(8, 2)))
    yield "analog 8-point decode, 100k samples", (octagon, np.zeros(octagon.shape, dtype=np.uint8), protos, np.inf)

    erased = (rng.random(binary.shape) < 0.2).astype(np.uint8)
    erased[:, 0] = 0
    yield "hamming74 with 20% erasures, 200k words", (binary, erased, book.vectors, 1.0)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"{'workload':45s} {'pure':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, call_args in workloads():
        pure_t = time_call(_kernels_py.decode_batch, *call_args, repeats=args.repeats)
        if compiled is None:
            print(f"{name:45s} {pure_t * 1e3:8.1f}ms {'n/a':>10s} {'n/a':>8s}")
            continue
        fast_t = time_call(compiled.decode_batch, *call_args, repeats=args.repeats)
        pure_res = _kernels_py.decode_batch(*call_args)
        fast_res = compiled.decode_batch(*call_args)
        agree = all(np.array_equal(a, b) for a, b in zip(pure_res[:1], fast_res[:1]))
        agree = agree and np.array_equal(pure_res[2], fast_res[2])
        flag = "" if agree else "  (MISMATCH!)"
        print(f"{name:45s} {pure_t * 1e3:8.1f}ms {fast_t * 1e3:8.1f}ms {pure_t / fast_t:7.1f}x{flag}")


if __name__ == "__main__":
    main()
