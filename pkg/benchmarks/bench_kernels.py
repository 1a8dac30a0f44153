"""Compare the compiled and pure-Python kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per backend and the speedup.  Workloads mirror the
library's hot paths: a Sturm count on the default eigen grid, one tridiagonal
solve, and a full backward-Euler heat run (1000 steps, M = 2000).
"""
import argparse
import timeit

import numpy as np

from shlab import _kernels
from shlab.discretize import assemble, build_grid
from shlab.domain import DomainSpec, PotentialSpec


def workloads():
    ball = DomainSpec.ball(3, 1.0)
    eig_op = assemble(build_grid(3, 1.0, 4000), ball, PotentialSpec.regularized(1e-4, 0.3))
    heat_op = assemble(build_grid(3, 1.0, 2000), ball, PotentialSpec.truncated(1e4, 0.2))
    a, e, w = eig_op.diag, eig_op.off, eig_op.mass_diag
    rhs = np.ones_like(a)
    shift = -2.0
    dt = 5e-4
    hw = heat_op.mass_diag
    heat_args = (hw + dt * heat_op.diag, dt * heat_op.off, heat_op.diag, heat_op.off, 1.0,
                 heat_op.stiff_diag, heat_op.stiff_off, hw, hw * heat_op.potential_diag,
                 None, np.ones(hw.size), dt, 1000)
    return {
        "sturm_count (M=4000)": lambda k: k.sturm_count(a, e, w, 1.0),
        "spd_solve (M=4000)": lambda k: k.spd_solve(a - shift * w, e, rhs),
        "heat_march (M=2000, 1000 steps)": lambda k: k.heat_march(*heat_args),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    names = _kernels.available_backends()
    print(f"backends: {', '.join(names)}")
    print(f"{'workload':34s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in workloads().items():
        times = []
        for name in names:
            k = _kernels.backend(name)
            fn(k)  # warm up
            number = 1 if "heat" in label else 20
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            times.append(best)
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
