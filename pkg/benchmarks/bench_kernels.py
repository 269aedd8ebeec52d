"""Compiled vs pure-Python tridiagonal kernels on the effective-operator matrices.

    python3 benchmarks/bench_kernels.py [--cells 2048 8192 32768] [--repeat 3]

Times the two hot paths of a 1D solve (Sturm-count bisection for the lowest
three eigenvalues, then one shifted solve per eigenvalue) with each backend
and checks that both return the same eigenvalues.
"""
import argparse
import time

import numpy as np

from twistspec import _tridiag_py, sturm
from twistspec.geometry import CrossSection

try:
    from twistspec import _tridiag as _compiled
except ImportError:
    _compiled = None


def standard_form(cells):
    slp = sturm.assemble_effective(CrossSection(1.0, 2.0), 0, sturm.Grid1D(cells))
    b = sturm.discretize(slp).blocks[0]
    root = np.sqrt(b.mass)
    return b.diag / b.mass, b.off / (root[:-1] * root[1:])


def bench(impl, d, e, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        vals = impl.bisect_eigenvalues(d, e, 0, 3)
        x = np.ones(len(d))
        for lam in vals:
            impl.solve_shifted(d, e, lam, x)
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(vals)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[2048, 8192, 32768])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'cells':>8} {'python [s]':>12} {'cython [s]':>12} {'speed-up':>9} {'max |diff|':>11}")
    for n in args.cells:
        d, e = standard_form(n)
        tp, vp = bench(_tridiag_py, d, e, args.repeat)
        if _compiled is None:
            print(f"{n:8d} {tp:12.4f} {'-':>12} {'-':>9} {'-':>11}")
            continue
        tc, vc = bench(_compiled, d, e, args.repeat)
        print(f"{n:8d} {tp:12.4f} {tc:12.4f} {tp / tc:8.1f}x {np.abs(vp - vc).max():11.2e}")


if __name__ == "__main__":
    main()
