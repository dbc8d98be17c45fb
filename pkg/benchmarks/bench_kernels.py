"""Numba kernels against the numpy reference path.

    python benchmarks/bench_kernels.py                 # kernels at grid_n 64, 128, 256
    python benchmarks/bench_kernels.py --grid-n 512 --repeat 5
    python benchmarks/bench_kernels.py --solve         # end-to-end solve, one process per backend

Kernel timings call both implementations in one process (numba compile
time is excluded by a warm-up call) and check that they agree. The solve
comparison runs a subprocess with THETALAM_DISABLE_NUMBA=1 so the whole
pipeline takes the numpy path.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from thetalam import _kernels as K
from thetalam.geom import HalfDiskGrid, MetricProfile
from thetalam.theta_pde import energy_model

KERNELS = ("energy_terms", "gradient_terms", "hessian_terms", "hessian_pd_terms")

SOLVE_SNIPPET = """
import json, sys, time
from thetalam import _kernels
from thetalam.geom import HalfDiskGrid, MetricProfile
from thetalam.lam_sim import TargetSet, make_boundary_sequence
from thetalam.theta_pde import solve_dirichlet
n = int(sys.argv[1])
g = HalfDiskGrid.build(n)
bc = make_boundary_sequence(TargetSet.parse("0.25"), 8)
solve_dirichlet(bc, MetricProfile.euclidean(), HalfDiskGrid.build(32))  # warm-up / compile
t = time.perf_counter()
sol = solve_dirichlet(bc, MetricProfile.euclidean(), g)
print(json.dumps({"backend": _kernels.backend(), "seconds": time.perf_counter() - t,
                  "iterations": sol.iterations, "energy": sol.energy}))
"""


def _args(m, theta, name):
    base = (theta, m.tri, m.gr, m.w, m.q)
    if name == "hessian_pd_terms":
        return base + (np.ascontiguousarray(m.dual(theta)),)
    return base


def _best(f, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        f(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def bench_kernels(grid_ns, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in grid_ns:
        g = HalfDiskGrid.build(n)
        m = energy_model(g, MetricProfile.euclidean())
        theta = np.ascontiguousarray(np.sin(3 * g.z) + g.r**2 + 0.01 * rng.standard_normal(g.n_nodes))
        for name in KERNELS:
            f_np = getattr(K, name + "_np")
            args = _args(m, theta, name)
            t_np = _best(f_np, args, repeat)
            row = {"grid_n": n, "triangles": len(g.triangles), "kernel": name, "numpy_s": t_np}
            if K.HAVE_NUMBA:
                f_nb = getattr(K, name + "_nb")
                f_nb(*args)  # compile
                t_nb = _best(f_nb, args, repeat)
                diff = float(np.max(np.abs(f_nb(*args) - f_np(*args))))
                row.update({"numba_s": t_nb, "speedup": t_np / t_nb, "max_abs_diff": diff})
            rows.append(row)
    return rows


def bench_solve(grid_n):
    out = []
    for disable in ("0", "1"):
        env = dict(os.environ, THETALAM_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET, str(grid_n)], env=env,
                             capture_output=True, text=True, check=True)
        out.append(json.loads(res.stdout.strip().splitlines()[-1]))
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grid-n", type=int, nargs="+", default=[64, 128, 256])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--solve", action="store_true", help="also time a full solve with each backend")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    args = p.parse_args(argv)

    rows = bench_kernels(args.grid_n, args.repeat)
    solves = [dict(r, grid_n=n) for n in args.grid_n for r in bench_solve(n)] if args.solve else []
    if args.json:
        print(json.dumps({"kernels": rows, "solves": solves}, indent=2, sort_keys=True))
        return 0
    print(f"backend in use: {K.backend()}  threads: {K.numba.get_num_threads() if K.HAVE_NUMBA else 1}")
    print(f"{'grid_n':>6} {'kernel':<18} {'numpy ms':>9} {'numba ms':>9} {'speedup':>8} {'max diff':>9}")
    for r in rows:
        nb = f"{1e3 * r['numba_s']:9.2f} {r['speedup']:8.1f} {r['max_abs_diff']:9.1e}" if "numba_s" in r else ""
        print(f"{r['grid_n']:>6} {r['kernel']:<18} {1e3 * r['numpy_s']:9.2f} {nb}")
    for s in solves:
        print(f"solve grid_n={s['grid_n']} {s['backend']:<6} {s['seconds']:7.2f} s  "
              f"{s['iterations']} iterations  E={s['energy']:.12f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
