#!/usr/bin/env python3
"""Benchmark the numba kernel lane against the pure-numpy fallback.

Micro-benchmarks time the three hot kernels on representative per-slot
workloads; the macro benchmark runs a full alternating optimization in a
subprocess per lane (the lane is fixed at import time via UAVSEC_BACKEND).

Usage:
    python benchmarks/bench_backends.py            # micro benchmarks
    python benchmarks/bench_backends.py --full     # adds the macro run
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from uavsec import kernels

_MACRO_SNIPPET = """
import time
from uavsec import kernels, planner
from uavsec.scenario import reference_scenario
s = reference_scenario(120)
planner.baseline(s, "fhf_adaptive")          # warm-up / jit compile
t0 = time.perf_counter()
plan = planner.optimize(s)
print(f"{kernels.BACKEND}: optimize(T=120) {time.perf_counter() - t0:.2f} s, "
      f"avg_rbar={plan.avg_rbar:.4f}")
"""


def _time(fn, args, repeats=200):
    fn(*args)  # warm-up (jit compile on the numba lane)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def micro(n=200, repeats=500):
    rng = np.random.default_rng(7)
    q1 = rng.uniform(-500, 500, (n, 2))
    q2 = rng.uniform(-500, 500, (n, 2))
    p1 = rng.uniform(0, 4, n)
    p2 = rng.uniform(0, 4, n)
    slot_args = (q1, q2, p1, p2, 0.0, 0.0, 200.0, 0.0, 10.0, 1e4, 1.21e4, 1e8)

    g = rng.uniform(1e2, 1e4, (3, n))
    lin = rng.uniform(0, 1e3, (2, n))
    c0 = rng.uniform(-5, 5, n)
    power_args = (p1, p2, g[0], g[1], g[2], lin[0], lin[1], c0, 1.0 / n)

    xs = np.column_stack([rng.uniform(-300, 300, (n, 4)),
                          rng.uniform(1.3e4, 3e5, (n, 3))])
    coef = rng.uniform(0, 1e-4, (3, n))
    traj_args = (xs, p1, p2, coef[0], coef[1], coef[2], c0,
                 1e8, 0.0, 0.0, 200.0, 0.0, 10.0, 1e-12, 1.0 / n)

    rows = []
    for name, idx, args in (("slot_rates", 0, slot_args),
                            ("power_rows", 1, power_args),
                            ("traj_rows", 2, traj_args)):
        t_np = _time(kernels.NUMPY_LANE[idx], args, repeats)
        if kernels.NUMBA_LANE is not None:
            t_nb = _time(kernels.NUMBA_LANE[idx], args, repeats)
            rows.append((name, t_np, t_nb, t_np / t_nb))
        else:
            rows.append((name, t_np, float("nan"), float("nan")))

    print(f"kernel micro-benchmarks, N={n} slots, {repeats} repeats "
          f"(selected backend: {kernels.BACKEND})")
    print(f"{'kernel':<12} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, t_np, t_nb, ratio in rows:
        nb = f"{t_nb * 1e6:9.1f} us" if np.isfinite(t_nb) else "      n/a"
        sp = f"{ratio:8.1f}x" if np.isfinite(ratio) else "     n/a"
        print(f"{name:<12} {t_np * 1e6:9.1f} us {nb:>12} {sp:>9}")


def macro():
    print("\nend-to-end alternating optimization per lane (subprocesses):")
    for lane in ("numpy", "numba"):
        env = dict(os.environ, UAVSEC_BACKEND=lane)
        proc = subprocess.run([sys.executable, "-c", _MACRO_SNIPPET], env=env,
                              capture_output=True, text=True)
        out = proc.stdout.strip() or proc.stderr.strip()
        print(" ", out)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--full", action="store_true",
                        help="also run the end-to-end macro benchmark")
    args = parser.parse_args()
    micro()
    if args.full:
        macro()
