"""Compare the compiled and numpy fixed-step loops.

    python benchmarks/bench_kernels.py [--n 6] [--steps 200000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from phgraph import kernels


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6, help="state dimension")
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    n, steps = args.n, args.steps
    A = rng.normal(size=(n, n)) - 3 * np.eye(n)
    Bu = rng.normal(size=(n, 2))
    U = rng.normal(size=(2 * steps + 1, 2))
    x0 = rng.normal(size=n)
    P = np.eye(n) + 1e-3 * A

    impls = kernels.backends()
    print(f"n={n} steps={steps} default backend: {kernels.BACKEND}")
    results = {}
    for name, mod in sorted(impls.items()):
        t_rk = best_of(lambda: mod.rk4_affine(A, Bu, U, x0, 1e-3, steps), args.repeat)
        t_mp = best_of(lambda: mod.midpoint_affine(P, Bu, U[:steps], x0, steps), args.repeat)
        results[name] = (t_rk, t_mp)
        print(f"{name:>7}: rk4 {t_rk * 1e3:9.2f} ms   midpoint {t_mp * 1e3:9.2f} ms")
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        print(f"speed-up: rk4 x{py[0] / cy[0]:.1f}, midpoint x{py[1] / cy[1]:.1f}")
        a = impls["python"].rk4_affine(A, Bu, U, x0, 1e-3, steps)
        b = impls["cython"].rk4_affine(A, Bu, U, x0, 1e-3, steps)
        print(f"max |difference|: {np.max(np.abs(a - b)):.1e}")
    else:
        print("compiled extension not built; only the numpy fallback is available")


if __name__ == "__main__":
    main()
