#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy reference backend.

The hot paths are the Hessian-power energy/gradient sweep (capacity
minimization) and the weighted quadratic apply (inner PCG); the Laplacian
apply drives Newton-CG.  Run after building the extension in place:

    python3 setup.py build_ext --inplace
    python3 benchmarks/bench_kernels.py [--cells 64 96]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from yamcap import kernels  # noqa: E402
from yamcap.kernels import reference  # noqa: E402


def timeit(fn, repeats=5):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench(cells):
    rng = np.random.default_rng(0)
    p = np.ascontiguousarray(rng.standard_normal((cells,) * 3))
    rho = np.ascontiguousarray(np.abs(rng.standard_normal((cells,) * 3)) + 0.2)
    h = 4.1 / cells
    rows = []
    ref = {
        "hess energy+grad": lambda: reference.hess_power_full(p, h, 1.25, 3, True),
        "quad apply": lambda: _quad_ref(p, rho, h),
        "laplacian": lambda: reference.lap_full(p, h),
    }
    if kernels.HAVE_COMPILED:
        core = kernels._core
        cy = {
            "hess energy+grad": lambda: core.hess_power_3d(p, h, 3, True),
            "quad apply": lambda: core.quad_apply_3d(p, rho, h),
            "laplacian": lambda: core.lap_3d(p, h),
        }
    else:
        cy = None
    for name in ref:
        t_ref = timeit(ref[name])
        if cy is None:
            rows.append((name, t_ref, None, None))
        else:
            t_cy = timeit(cy[name])
            rows.append((name, t_ref, t_cy, t_ref / t_cy))
    return rows


def _quad_ref(p, rho, h):
    out = np.zeros_like(p)
    for a in range(3):
        out += reference.second_diff(rho * reference.second_diff(p, a, h), a, h)
    for a in range(3):
        for b in range(a + 1, 3):
            out += 2.0 * reference.cross_diff(rho * reference.cross_diff(p, a, b, h), a, b, h)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cells", type=int, nargs="+", default=[64, 96])
    args = parser.parse_args()
    print(f"backend selected at import: {kernels.BACKEND}")
    for cells in args.cells:
        print(f"\n{cells}^3 grid")
        print(f"{'kernel':>18} {'reference':>12} {'compiled':>12} {'speedup':>9}")
        for name, t_ref, t_cy, speed in bench(cells):
            cy_s = f"{t_cy * 1e3:9.1f} ms" if t_cy is not None else "        n/a"
            sp_s = f"{speed:8.1f}x" if speed is not None else "      n/a"
            print(f"{name:>18} {t_ref * 1e3:9.1f} ms {cy_s} {sp_s}")


if __name__ == "__main__":
    main()
