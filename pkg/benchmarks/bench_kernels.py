"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--paths P] [--steps S]

Prints one line per kernel with the median wall time of each backend and
the speed-up, and checks that both backends return the same numbers.
"""

import argparse
import math
import statistics
import time

import numpy as np

from wedge import _fallback
from wedge._backend import kernels
from wedge.ode import DEFAULT_OPTIONS, _coeffs, _launch
from wedge.params import dimensionless, geometry


def _median_time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def bench_curve(mod, repeat):
    g = geometry(dimensionless(0.5, 1.0, 2.0 / 3.0, xi=0.1))
    m1, m2, k, cr = _coeffs(g)
    o = DEFAULT_OPTIONS
    q1, e1, l1, d = _launch(0.3, g, o)

    def run():
        return mod.integrate_eta(q1, e1, l1, 1.0 - 1e-12, float(d), m1, m2, k, cr,
                                 o.rtol, o.atol, o.event_tol, o.max_steps)

    return _median_time(run, repeat)


def bench_paths(mod, repeat, paths, steps):
    z = np.random.default_rng(1).standard_normal((paths, steps))
    grid = np.linspace(0.98, 1.0, 257)
    args = (z, 0.5, 0.5, 1e-3, 0.5, 2.0 / 3.0, 0.25, math.sqrt(0.5), 0.05, 0.05,
            0.3, 0.78, grid, 0.3, 0.78)
    return _median_time(lambda: mod.simulate_batch(*args), repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--paths", type=int, default=64)
    ap.add_argument("--steps", type=int, default=4000)
    args = ap.parse_args(argv)
    try:
        fast = kernels("compiled")
    except ImportError:
        print("compiled extension not built; only the fallback is available")
        return 1
    rows = []
    tc, oc = bench_curve(fast, args.repeat)
    tp, op = bench_curve(_fallback, args.repeat)
    same = oc[5] == op[5] and np.array_equal(np.asarray(oc[3]), np.asarray(op[3]))
    rows.append(("integrate_eta", tc, tp, same))
    tc, oc = bench_paths(fast, args.repeat, args.paths, args.steps)
    tp, op = bench_paths(_fallback, max(1, args.repeat // 2), args.paths, args.steps)
    same = np.allclose(np.asarray(oc[0]), np.asarray(op[0]), rtol=1e-12, atol=1e-12)
    rows.append((f"simulate_batch {args.paths}x{args.steps}", tc, tp, same))
    print(f"{'kernel':32s} {'compiled':>12s} {'python':>12s} {'speed-up':>9s}  agree")
    for name, a, b, ok in rows:
        print(f"{name:32s} {a * 1e3:10.3f}ms {b * 1e3:10.3f}ms {b / a:9.1f}  {ok}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
