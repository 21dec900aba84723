"""Compare the numba kernels with their numpy/scipy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Prints the median time per call for each kernel at a few sizes, checks the
two paths agree, and finishes with a whole-tracker timing under the active
backend (set SMCTRACK_DISABLE_NUMBA=1 to time the fallback).
"""

import argparse
import statistics
import time

import numpy as np

from smctrack import _kernels
from smctrack.association import TrackerConfig, run_sequence
from smctrack.io.synth import generate_scenario
from smctrack.scenarios import random_spec


def median_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def random_boxes(rng, n):
    xy = rng.uniform(0, 500, size=(n, 2))
    wh = rng.uniform(20, 80, size=(n, 2))
    return np.hstack([xy, wh])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if not _kernels.HAVE_NUMBA:
        print("numba not importable; only the fallback can be timed")
        return
    _kernels.iou_matrix_jit(random_boxes(rng, 2), random_boxes(rng, 2))
    _kernels.assign_rows_jit(rng.random((2, 3)))

    print(f"{'kernel':<14}{'size':>10}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for n in (10, 50, 200):
        a, b = random_boxes(rng, n), random_boxes(rng, n)
        assert np.allclose(_kernels.iou_matrix_jit(a, b), _kernels.iou_matrix_py(a, b), atol=1e-12)
        t_jit = median_time(_kernels.iou_matrix_jit, (a, b), args.repeat)
        t_py = median_time(_kernels.iou_matrix_py, (a, b), args.repeat)
        print(f"{'iou_matrix':<14}{f'{n}x{n}':>10}{t_jit * 1e6:>12.1f}{t_py * 1e6:>12.1f}{t_py / t_jit:>10.2f}")
    for n in (10, 50, 200):
        cost = rng.random((n, n + 5))
        cj, cp = _kernels.assign_rows_jit(cost), _kernels.assign_rows_py(cost)
        rows = np.arange(n)
        assert np.isclose(cost[rows, cj].sum(), cost[rows, cp].sum(), rtol=1e-12)
        t_jit = median_time(_kernels.assign_rows_jit, (cost,), max(args.repeat // 10, 5))
        t_py = median_time(_kernels.assign_rows_py, (cost,), max(args.repeat // 10, 5))
        print(f"{'assign_rows':<14}{f'{n}x{n + 5}':>10}{t_jit * 1e6:>12.1f}{t_py * 1e6:>12.1f}{t_py / t_jit:>10.2f}")

    scenario = generate_scenario(random_spec(0, identities=30, frames=300))
    t0 = time.perf_counter()
    run_sequence(scenario.frames, TrackerConfig())
    print(f"tracker, 30 ids x 300 frames, backend {_kernels.BACKEND}: {time.perf_counter() - t0:.2f} s")


if __name__ == "__main__":
    main()
