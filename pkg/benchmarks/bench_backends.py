#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot paths: scalar tail integrals (root-finding and bound
minimization call these thousands of times), the weight-equation solve,
and the full splitting-solver inner loop on a desk-scale instance.

Usage: python benchmarks/bench_backends.py
"""

import time

import numpy as np

from blockprior._backend import load


def time_call(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_tail_moments(kernels):
    zs = np.linspace(0.0, 8.0, 400)

    def run():
        total = 0.0
        for k in (2, 10, 30):
            for z in zs:
                total += kernels.tail_moment2(float(z), k)
                total += kernels.tail_moment1(float(z), k)
        return total

    return time_call(run)


def bench_weight_solve(kernels):
    # bisection + Newton through the kernel functions, as the weights
    # module does, over a 300-point accuracy grid
    import math

    def solve(alpha, k):
        c = 2.0 ** (k / 2.0 - 1.0) * math.gamma(k / 2.0)

        def g(w):
            return alpha * w - (1 - alpha) * kernels.tail_moment1(w, k) / c

        lo, hi = 0.0, (1 - alpha) / alpha * kernels.tail_moment1(0.0, k) / c + 1
        while hi - lo > 1e-6:
            mid = 0.5 * (lo + hi)
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
        w = 0.5 * (lo + hi)
        for _ in range(50):
            gw = g(w)
            if abs(gw) < 1e-13:
                break
            w -= gw / (alpha + (1 - alpha) * kernels.tail_moment0(w, k) / c)
        return w

    grid = np.linspace(0.01, 0.99, 300)

    def run():
        return sum(solve(float(a), 10) for a in grid)

    return time_call(run)


def bench_dr_loop(kernels):
    rng = np.random.default_rng(0)
    n, q, k, m = 640, 64, 10, 400
    x = np.zeros(n)
    for b in rng.choice(q, size=20, replace=False):
        x[b * k:(b + 1) * k] = rng.standard_normal(k)
    A = rng.standard_normal((m, n))
    y = A @ x
    pinv = np.linalg.pinv(A)
    null_proj = np.ascontiguousarray(np.eye(n) - pinv @ A)
    x_feas = pinv @ y
    tau_w = np.ones(q)

    def run():
        z = x_feas.copy()
        out = np.empty(n)
        it, _, conv = kernels.dr_loop(null_proj, x_feas, tau_w, k,
                                      5000, 1e-9, z, out, None)
        assert conv, "benchmark instance failed to converge"
        return it

    return time_call(run), run()


def main():
    backends = {}
    backends["pure"], _ = load("python")
    try:
        backends["compiled"], _ = load("c")
    except ImportError:
        print("compiled backend not available; benchmarking pure only")

    rows = []
    for name, kernels in backends.items():
        t_tails = bench_tail_moments(kernels)
        t_weights = bench_weight_solve(kernels)
        t_dr, iters = bench_dr_loop(kernels)
        rows.append((name, t_tails, t_weights, t_dr, iters))

    print(f"{'backend':<10} {'tail integrals':>15} {'weight solve':>14} "
          f"{'dr solve':>10} {'dr iters':>9}")
    for name, t1, t2, t3, it in rows:
        print(f"{name:<10} {t1 * 1e3:>13.1f}ms {t2 * 1e3:>12.1f}ms "
              f"{t3 * 1e3:>8.1f}ms {it:>9}")
    if len(rows) == 2:
        base = rows[0]
        comp = rows[1]
        print(f"\nspeedup (compiled vs pure): tails {base[1] / comp[1]:.1f}x, "
              f"weights {base[2] / comp[2]:.1f}x, solver {base[3] / comp[3]:.1f}x")


if __name__ == "__main__":
    main()
