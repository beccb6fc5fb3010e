"""Compiled vs pure-Python midpoint kernel.

Times the full time loop (banded solve, matvecs, energy ledger) for a few
mesh sizes.  Sparse recording keeps the output copy out of the measurement.

    python benchmarks/bench_midpoint.py [--steps 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from piezo_lab import BeamParameters, assemble, build_mesh, project_initial_data
from piezo_lab import backend
from piezo_lab.timestepper import run


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", type=int, nargs="+", default=[25, 100, 400])
    args = ap.parse_args()

    kernels = backend.available()
    print(f"kernels: {', '.join(kernels)}")
    if "compiled" not in kernels:
        print("compiled kernel not built; only the fallback can be timed")
    print(f"{'n':>5} {'backend':>9} {'seconds':>9} {'us/step':>9} {'speedup':>8} {'max |dx|':>10}")
    for n in args.sizes:
        s = assemble(build_mesh(n), BeamParameters())
        x0 = project_initial_data("gaussian_velocity", s)
        results = {}
        for name in kernels:
            def go(name=name):
                return run(s, x0, n_steps=args.steps, record_every=args.steps, backend=name)
            go()  # warm the factorisation cache
            results[name] = (best_of(go, args.repeat), go().states[-1])
        ref = results["python"][0]
        for name, (sec, xf) in results.items():
            diff = np.max(np.abs(xf - results["python"][1]))
            print(f"{n:>5} {name:>9} {sec:>9.3f} {1e6 * sec / args.steps:>9.2f} {ref / sec:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
