"""Time the compiled sampling kernels against the pure-Python fallback.

Run ``python3 benchmarks/bench_kernels.py``.  Prints the best-of-N wall time
for each kernel and backend, the speedup, and the max absolute difference
between backend outputs.
"""
import argparse
import timeit

import numpy as np

from covmatch import _kernels


def _cases(samples, k, nnu, grid):
    rng = np.random.default_rng(0)
    normals = rng.standard_normal((samples, 2**k - 1))
    b = rng.standard_normal((samples, 2**k, nnu))
    lam = rng.standard_normal((nnu, grid))
    return {
        "lc_fill": lambda mod: mod.lc_fill(normals, k),
        "tail_sup": lambda mod: mod.tail_sup(b, lam),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--nnu", type=int, default=2)
    p.add_argument("--grid", type=int, default=17)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    py, cy = _kernels.python_kernels, _kernels.cython_kernels
    if cy is None:
        print("compiled backend unavailable; timing the Python fallback only")
    print(f"samples={args.samples} k={args.k} nnu={args.nnu} grid={args.grid}")
    print(f"{'kernel':<10} {'python_s':>10} {'cython_s':>10} {'speedup':>8} {'max_diff':>10}")
    for name, call in _cases(args.samples, args.k, args.nnu, args.grid).items():
        t_py = min(timeit.repeat(lambda: call(py), number=1, repeat=args.repeat))
        if cy is None:
            print(f"{name:<10} {t_py:>10.4f} {'-':>10} {'-':>8} {'-':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: call(cy), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(call(py) - call(cy))))
        print(f"{name:<10} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
