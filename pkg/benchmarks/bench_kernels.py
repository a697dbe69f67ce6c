"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are built in-process, so no environment flag is needed.
"""

import argparse
import time

import numpy as np

from monotrend import kernels


def best_of(fn, repeat):
    fn()  # warm-up (includes JIT compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    y = rng.standard_normal(100_000).cumsum()
    x = np.arange(y.size + 1, dtype=float)
    s = np.concatenate([[0.0], y])
    eps = rng.standard_normal(1_000_000)
    left = rng.standard_normal(2500) * 0.03
    right = rng.standard_normal(2500) * 0.03
    w = np.cumsum(rng.standard_normal(5000) * 0.03)
    return {
        "compensated_cumsum n=1e5": lambda b: b.compensated_cumsum(y),
        "gcm_knots n=1e5": lambda b: b.gcm_knots(x, s),
        "pava n=1e5": lambda b: b.pava(rng.standard_normal(100_000), np.ones(100_000)),
        "ar1_filter n=1e6": lambda b: b.ar1_filter(0.0, eps, 0.9),
        "chernoff_argmin 2x2500": lambda b: b.chernoff_argmin(left, right, 1e-3),
        "penalized_sup n=5000": lambda b: b.penalized_sup(w, 1e-3, 0.25, 1.0, 0.5),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.NUMBA is None:
        raise SystemExit("numba is not importable; nothing to compare")
    print(f"{'kernel':28s} {'numba ms':>10s} {'numpy ms':>10s} {'ratio':>7s}")
    for name, call in cases(np.random.default_rng(0)).items():
        tn = best_of(lambda: call(kernels.NUMBA), args.repeat)
        tp = best_of(lambda: call(kernels.NUMPY), args.repeat)
        print(f"{name:28s} {1e3 * tn:10.3f} {1e3 * tp:10.3f} {tp / tn:7.1f}")


if __name__ == "__main__":
    main()
