"""Time the compiled and pure-Python coordinate-descent cores on the same problems.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each problem is one weighted-L1 solve on a resample-sized design (n rows,
p columns).  Both cores get identical inputs; the script also reports the
largest coefficient difference between them.
"""
import argparse
import time

import numpy as np

from pqlwcr import _cd_py

try:
    from pqlwcr import _cd
except ImportError:
    _cd = None

PROBLEMS = [
    ("gaussian n=200 p=50", 0, 200, 50),
    ("gaussian n=200 p=500", 0, 200, 500),
    ("binomial n=200 p=50", 1, 200, 50),
    ("binomial n=1000 p=100", 1, 1000, 100),
]


def make_problem(family, n, p, seed=0):
    rng = np.random.default_rng(seed)
    X = np.asfortranarray(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[:4] = [2.0, -1.0, 1.5, -2.0]
    eta = X @ beta
    if family == 0:
        y = eta + rng.standard_normal(n)
    else:
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    pen = np.full(p, 0.05)
    return X, y, pen, np.zeros(p), 1.0 / n


def best_time(kernel, args, family, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = kernel.solve_weighted_l1(args[0], args[1], family, args[2], args[3].copy(), args[4])
        best = min(best, time.perf_counter() - t0)
    return best, out[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _cd is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'problem':<24}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}{'max |diff|':>13}")
    for name, family, n, p in PROBLEMS:
        prob = make_problem(family, n, p)
        t_py, b_py = best_time(_cd_py, prob, family, max(1, args.repeat // 2))
        t_cy, b_cy = best_time(_cd, prob, family, args.repeat)
        print(f"{name:<24}{1e3 * t_py:>14.2f}{1e3 * t_cy:>14.3f}{t_py / t_cy:>9.0f}x"
              f"{np.max(np.abs(b_py - b_cy)):>13.1e}")


if __name__ == "__main__":
    main()
