"""Compiled vs pure-Python Bessel kernel, plus one end-to-end far-field assembly.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]
"""

import argparse
import time

import numpy as np

from elastomono import specfun
from elastomono.farfield import DirectionGrid, assemble
from elastomono.medium import Background, disk_field


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = {
        "table 10k pts, n<=30": (rng.uniform(0.1, 50, 10_000), 30),
        "table 100k pts, n<=24": (rng.uniform(0.1, 20, 100_000), 24),
        "table 500 pts, n<=110": (rng.uniform(1e-3, 200, 500), 110),
    }
    bg = Background(2.0, 1.0, 1.0, 2.0)
    field = disk_field(bg, (0.3, 0.0), 1.0, psi_lambda=1.0, psi_rho=0.3)

    backends = specfun.available_backends()
    print(f"{'case':28s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    prev = specfun.BACKEND
    try:
        rows = list(cases.items()) + [("assemble F, N=128", None)]
        for name, case in rows:
            t = {}
            for b in backends:
                specfun.use_backend(b)
                if case is None:
                    t[b] = best_of(lambda: assemble(field, DirectionGrid(128)), args.repeat)
                else:
                    x, n = case
                    t[b] = best_of(lambda: specfun.jy_table(x, n), args.repeat)
            speed = t["python"] / t["compiled"] if "compiled" in t else float("nan")
            print(f"{name:28s}" + "".join(f"{t[b] * 1e3:10.2f}ms" for b in backends) + f"{speed:9.1f}x")
    finally:
        specfun.use_backend(prev)
    if "compiled" in backends:
        x, n = cases["table 10k pts, n<=30"]
        specfun.use_backend("compiled")
        Jc, Yc = specfun.jy_table(x, n)
        specfun.use_backend("python")
        Jp, Yp = specfun.jy_table(x, n)
        specfun.use_backend(prev)
        fin = np.isfinite(Yp)
        ry = np.abs(Yc[fin] - Yp[fin]) / np.abs(Yp[fin])
        print(f"max deviation compiled vs python: J {np.abs(Jc - Jp).max():.1e} (abs), "
              f"Y {ry.max():.1e} (rel)")


if __name__ == "__main__":
    main()
