"""Compare the numba and pure-numpy kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat N]

Both kernel variants are always importable, so one process times both.
Numba's first call (compilation or cache load) is reported separately.
"""
import argparse
import time

import numpy as np

from gpconsensus import kernels
from gpconsensus.dynamics import initial_state
from gpconsensus.graph import builtin_topology, laplacian


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def rk4_case(name, x0, h, n_steps):
    t = builtin_topology(name)
    pi, pj, beta = t.pair_arrays()
    y0 = initial_state(t, x0).pack()
    args = (y0, h, n_steps, 10, pi, pj, beta, t.node_count, 2.0, 1.0, True)
    return f"rk4 {name}, {n_steps} steps", args


def jacobi_case(m, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(m, m))
    return f"jacobi {m}x{m} random symmetric", (a + a.T, 1e-13, 100)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cases = [
        (kernels.rk4_numba, kernels.rk4_numpy, *rk4_case("p2", [0.0, 2.0], 1e-4, 200_000)),
        (kernels.rk4_numba, kernels.rk4_numpy, *rk4_case("paper6", [1, 6, 8, 13, 15, 19], 1e-3, 10_000)),
        (kernels.jacobi_numba, kernels.jacobi_numpy, *jacobi_case(6)),
        (kernels.jacobi_numba, kernels.jacobi_numpy, *jacobi_case(40)),
    ]
    lap = laplacian(builtin_topology("paper6"))
    kernels.jacobi_numba(lap, 1e-13, 100)  # warm-up shared by the Jacobi rows

    print(f"{'case':40s} {'first call':>11s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for fast, slow, label, kargs in cases:
        t0 = time.perf_counter()
        out_fast = fast(*kargs)
        first = time.perf_counter() - t0
        out_slow = slow(*kargs)
        np.testing.assert_allclose(out_fast[0], out_slow[0], rtol=1e-9, atol=1e-9)
        tf = best_of(lambda: fast(*kargs), args.repeat)
        ts = best_of(lambda: slow(*kargs), max(1, args.repeat // 3))
        print(f"{label:40s} {first:10.3f}s {tf:9.4f}s {ts:9.4f}s {ts / tf:7.0f}x")


if __name__ == "__main__":
    main()
