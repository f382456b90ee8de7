"""Compiled vs numpy kernel timings on one lattice per operator kind.

Run with ``python3 benchmarks/bench_kernels.py [--h 0.03125] [--steps 200]``.
Each row reports the best of ``--repeat`` runs of ``--steps`` explicit steps
and checks that both backends produce identical values.
"""

import argparse
import time

import numpy as np

from bhlab import geometry as geo
from bhlab.operators import Ellipticity
from bhlab.solver import CoefficientField, GridSpec, ProblemSpec, get_kernels
from bhlab.solver.core import Discretization

CASES = [
    ("extremal_plus", dict(ell=Ellipticity(1, 2, 1.0, 0.5))),
    ("extremal_minus", dict(ell=Ellipticity(0.5, 2, 1.0))),
    ("linear_nondiv", dict(ell=Ellipticity(1, 2), coeff=CoefficientField("random", seed=1, cell=0.1))),
    ("p_laplacian", dict(p=1.5)),
    ("p_laplacian", dict(p=3.0)),
]


def best_time(disc, u0, steps, dt, kern, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        u = u0.copy()
        t0 = time.perf_counter()
        disc.advance(u, steps, dt, kern)
        best = min(best, time.perf_counter() - t0)
        out = u
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=1 / 32)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    disk = geo.Disk(1.0)
    grid = GridSpec(geo.Cylinder(disk, 1.0), args.h)
    lat = grid.lattice
    try:
        fast = get_kernels("cython")
    except ImportError:
        fast = None
    slow = get_kernels("python")
    print(f"disk, h={args.h:g}, {lat.npts} unknowns, {len(lat.lines)} stencil lines, {args.steps} steps")
    print(f"{'operator':<22}{'cython [s]':>12}{'numpy [s]':>12}{'speedup':>10}  identical")
    for kind, kw in CASES:
        pr = ProblemSpec(kind, initial=lambda X: np.maximum(0.0, -disk.sd(X)), **kw)
        disc = Discretization(pr, lat)
        dt = 0.5 / disc.rate
        u0 = disc.work_vector(pr.initial_values(lat.coords))
        label = kind + (f"[p={kw['p']:g}]" if "p" in kw else "")
        ts, us = best_time(disc, u0, args.steps, dt, slow, args.repeat)
        if fast is None:
            print(f"{label:<22}{'n/a':>12}{ts:>12.4f}{'':>10}  (extension not built)")
            continue
        tf, uf = best_time(disc, u0, args.steps, dt, fast, args.repeat)
        print(f"{label:<22}{tf:>12.4f}{ts:>12.4f}{ts / tf:>9.1f}x  {np.array_equal(uf, us)}")


if __name__ == "__main__":
    main()
