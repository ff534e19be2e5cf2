#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-numpy fallbacks.

The package selects the backend at import time via POVMRAND_NO_NUMBA; this
script instead imports both paths side by side (the plain ``*_impl``
functions and their jitted aliases) and times them on representative
workloads: the guessing-probability LP, coincidence matching, and the MLE
fixed-point iteration.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from povmrand import kernels
from povmrand.geometry import make_polygon_povm
from povmrand.oracle import _candidate_directions, _columns
from povmrand.geometry import BlochVector, born_probabilities


def time_call(fn, *args, repeat: int):
    fn(*args)  # warm-up (JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_lp(repeat: int):
    povm = make_polygon_povm(6)
    state = BlochVector(0.63, 0.0, 0.31)
    target = born_probabilities(state, povm).probs
    dirs = _candidate_directions(povm, 720, state.as_array())
    A, c, _ = _columns(povm, dirs)
    args = (np.ascontiguousarray(A), np.ascontiguousarray(target), np.ascontiguousarray(c))
    return args


def bench_matcher(repeat: int):
    rng = np.random.default_rng(5)
    k = 2_000_000
    heralds = np.cumsum(rng.integers(100, 2500, size=k)).astype(np.int64)
    offsets = rng.integers(-6, 7, size=k)
    order = np.argsort(heralds + offsets, kind="stable")
    d_ticks = (heralds + offsets)[order]
    d_out = rng.integers(0, 3, size=k)[order]
    return heralds, d_ticks, d_out, 3, np.int64(6)


def bench_mle(repeat: int):
    povm = make_polygon_povm(4)
    F = np.ascontiguousarray(povm.elements())
    counts = np.array([4_003_111.0, 2_499_820.0, 997_204.0, 2_499_865.0])
    return F, counts, 0.5, 1e-12, 50_000, False


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        print("numba disabled/unavailable: only the numpy path will run")

    cases = [
        ("lp_solve_dense (N=6, 727 columns)", kernels._lp_solve_dense_impl,
         kernels.lp_solve_dense, bench_lp(args.repeat)),
        ("match_coincidences (2e6 pairs)", kernels._match_coincidences_impl,
         kernels.match_coincidences, bench_matcher(args.repeat)),
        ("mle_rrr (4 outcomes, 5e4 iters)", kernels._mle_rrr_impl,
         kernels.mle_rrr, bench_mle(args.repeat)),
    ]
    print(f"{'kernel':<40} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, plain, jitted, call_args in cases:
        t_plain = time_call(plain, *call_args, repeat=args.repeat)
        if kernels.NUMBA_ENABLED:
            t_jit = time_call(jitted, *call_args, repeat=args.repeat)
            print(f"{name:<40} {t_plain * 1e3:>10.2f}ms {t_jit * 1e3:>10.2f}ms "
                  f"{t_plain / t_jit:>8.1f}x")
        else:
            print(f"{name:<40} {t_plain * 1e3:>10.2f}ms {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
