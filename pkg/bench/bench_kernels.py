"""Time the compiled XYZ matvec against the numpy fallback.

    python bench/bench_kernels.py [--sizes 12 14 16 18 20] [--repeat 5]
"""
import argparse
import time

import numpy as np

from redfluct._core import KERNEL, apply_xyz, apply_xyz_python
from redfluct.model import XYZParams


def best_time(fn, x, out, L, coeffs, repeat):
    fn(x, out, L, *coeffs)  # warm-up
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(x, out, L, *coeffs)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[12, 14, 16, 18, 20])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    p = XYZParams(1.0, 0.4, 0.7)
    coeffs = (p.cz, *p.flip_amplitudes)
    rng = np.random.default_rng(0)
    print(f"compiled kernel available: {KERNEL == 'cython'}")
    print(f"{'L':>3} {'dim':>9} {'python [ms]':>12} {'compiled [ms]':>14} {'speedup':>8} {'max |diff|':>11}")
    for L in args.sizes:
        x = rng.standard_normal(1 << L)
        a, b = np.empty_like(x), np.empty_like(x)
        t_py = best_time(apply_xyz_python, x, a, L, coeffs, args.repeat)
        if KERNEL == "cython":
            t_c = best_time(apply_xyz, x, b, L, coeffs, args.repeat)
            diff = float(np.max(np.abs(a - b)))
            print(f"{L:>3} {1 << L:>9} {1e3 * t_py:>12.2f} {1e3 * t_c:>14.2f} {t_py / t_c:>8.1f} {diff:>11.1e}")
        else:
            print(f"{L:>3} {1 << L:>9} {1e3 * t_py:>12.2f} {'n/a':>14} {'n/a':>8} {'n/a':>11}")


if __name__ == "__main__":
    main()
