"""Timing comparison of the simplex pivot-loop kernels.

Runs an identical workload of random bounded LPs and matrix games through
the compiled kernel and the pure-numpy fallback, checks that both produce
the same optimal values, and reports wall time per kernel.

Usage: python3 benchmarks/bench_lp.py [--repeats 3] [--seed 0]
"""
import argparse
import time

import numpy as np

import cibgames.lp as lp
from cibgames.lp import _pivot_py, make_lp, solve_lp, solve_matrix_game

try:
    from cibgames.lp import _pivot_c
except ImportError:
    _pivot_c = None


def build_workload(seed):
    rng = np.random.default_rng(seed)
    items = []
    for _ in range(60):
        n = int(rng.integers(5, 35))
        m = int(rng.integers(5, 35))
        a = rng.uniform(0.1, 1.1, size=(m, n))
        b = rng.uniform(0.5, 1.5, size=m)
        items.append(("lp", make_lp(rng.normal(size=n), a_ub=a, b_ub=b)))
    for _ in range(60):
        shape = (int(rng.integers(2, 20)), int(rng.integers(2, 20)))
        items.append(("game", rng.normal(size=shape)))
    return items


def run_workload(kernel, items, repeats):
    prev = lp._pivot
    lp._pivot = kernel
    try:
        values, best = None, float("inf")
        for _ in range(repeats):
            out = []
            t0 = time.perf_counter()
            for kind, item in items:
                if kind == "lp":
                    out.append(solve_lp(item).value)
                else:
                    out.append(solve_matrix_game(item)[0])
            best = min(best, time.perf_counter() - t0)
            values = np.array(out)
        return values, best
    finally:
        lp._pivot = prev


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    items = build_workload(args.seed)
    print(f"workload: {len(items)} problems, best of {args.repeats} runs")

    vals_py, t_py = run_workload(_pivot_py, items, args.repeats)
    print(f"pure-numpy kernel: {t_py:8.3f} s")

    if _pivot_c is None:
        print("compiled kernel not built; skipping comparison")
        return

    vals_c, t_c = run_workload(_pivot_c, items, args.repeats)
    print(f"compiled kernel:   {t_c:8.3f} s")
    print(f"speedup:           {t_py / t_c:8.2f}x")

    gap = float(np.max(np.abs(vals_py - vals_c)))
    print(f"max value gap between kernels: {gap:.3e}")
    if gap > 1e-12:
        raise SystemExit("kernels disagree beyond 1e-12")


if __name__ == "__main__":
    main()
