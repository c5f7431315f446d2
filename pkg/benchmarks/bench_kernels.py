"""Time the numba kernels against their pure-numpy fallbacks.

Workload shapes mirror real use: Adam steps over the big trunk layer,
test-vs-train distance matrices, and a root-node split sweep over all 256
histogram features. Run:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from typesift.kernels import numba_impl, numpy_impl
from typesift.ndmath import make_rng

REPEATS = 5


def timed(fn, *args):
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_adam(impl):
    rng = make_rng(0)
    n = 512 * 256                       # largest trunk weight matrix
    param = rng.standard_normal(n)
    grad = rng.standard_normal(n)
    m = np.zeros(n)
    v = np.zeros(n)

    def run():
        for t in range(1, 21):
            c1 = 1.0 - 0.9 ** t
            c2 = 1.0 - 0.999 ** t
            impl.adam_update(param, grad, m, v, c1, c2, 5e-4, 0.9, 0.999, 1e-8)

    return timed(run)


def bench_sq_dists(impl):
    rng = make_rng(1)
    queries = rng.random((572, 256))    # test set against training set
    points = rng.random((2288, 256))
    return timed(impl.sq_dists, queries, points)


def bench_split_scan(impl):
    rng = make_rng(2)
    n = 2288
    x = rng.random((n, 256))
    y = rng.integers(11, size=n)

    def run():
        for f in range(256):            # one root-node sweep
            order = np.argsort(x[:, f], kind="stable")
            impl.split_scan(np.ascontiguousarray(x[order, f]),
                            np.ascontiguousarray(y[order]), 11)

    return timed(run)


def main():
    benches = (("adam_update x20", bench_adam),
               ("sq_dists 572x2288", bench_sq_dists),
               ("split_scan 256 features", bench_split_scan))
    # trigger JIT compilation outside the timed region
    for _, bench in benches:
        bench(numba_impl)

    print(f"{'kernel':<26} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, bench in benches:
        t_np = bench(numpy_impl)
        t_nb = bench(numba_impl)
        print(f"{name:<26} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
