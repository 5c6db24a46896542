"""Wall-clock comparison of the numba and numpy step kernels.

    python3 benchmarks/bench_backends.py [--trajectories 64] [--steps 2000]

The numba timing excludes compilation (one warm-up call first).
"""

import argparse
import time

import numpy as np

from mirrorcool import _backend, make_params
from mirrorcool.sde import SDEModel, simulate_batch


def timed(model, n, steps, backend, repeats):
    x0 = np.full(n, model.trap.center)
    p0 = np.linspace(-50, 50, n)
    t_end = steps * model.dt
    simulate_batch(model, x0, p0, 10 * model.dt, 10, backend=backend)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        res = simulate_batch(model, x0, p0, t_end, steps, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, res


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trajectories", type=int, default=64)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--modes", type=int, default=256)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    model = SDEModel.build(make_params(), n_modes=args.modes, dt=2e-3)
    work = args.trajectories * args.steps
    results = {}
    backends = ["numpy"] + (["numba"] if _backend.HAS_NUMBA else [])
    for name in backends:
        secs, res = timed(model, args.trajectories, args.steps, name, args.repeats)
        results[name] = res
        print(f"{name:6s} {secs:8.3f} s  {work / secs / 1e3:9.1f} k trajectory-steps/s")
    if len(results) == 2:
        a, b = results["numba"].data, results["numpy"].data
        print(f"max relative difference {np.max(np.abs(a - b) / (np.abs(b) + 1e-300)):.1e}")


if __name__ == "__main__":
    main()
