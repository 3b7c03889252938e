"""Compiled vs. pure-Python kernels.

The backend is fixed when ``furuta_bench`` is imported, so each backend runs
in its own interpreter::

    python3 benchmarks/bench_kernels.py            # both, side by side
    python3 benchmarks/bench_kernels.py --worker   # current backend only, JSON on stdout

Each case reports the best of ``--repeat`` timings, after one untimed warm-up
call (which is also where numba compiles or loads its cache).
"""

import argparse
import json
import os
import subprocess
import sys
import time


def cases():
    import math

    from furuta_bench.config import ExperimentConfig
    from furuta_bench.dynamics import State, simulate
    from furuta_bench.estimation import NoiseModel, velocity_noise
    from furuta_bench.experiments import run_episode

    cfg = ExperimentConfig.load()
    setup = cfg.setup()
    p = setup.params
    return {
        "rk4 10k steps": lambda: simulate(State(0.0, math.pi / 2, 0.0, 0.0), 0.0, 1e-4, 10_000, p),
        "hybrid episode 10 s": lambda: run_episode(setup, "hybrid", State.hanging(), 10.0),
        "measured episode 10 s": lambda: run_episode(setup, "hybrid", State.hanging(), 10.0, noise=NoiseModel(0.5, 0)),
        "velocity noise 1e5": lambda: velocity_noise(1.0, 120.0, 100_000),
    }


def worker(repeat):
    from furuta_bench import backend

    out = {"backend": backend(), "timings": {}}
    for name, fn in cases().items():
        fn()
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out["timings"][name] = best
    json.dump(out, sys.stdout)


def run_backend(disable, repeat):
    env = dict(os.environ, FURUTA_BENCH_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat)
        return
    jit = run_backend(False, args.repeat)
    py = run_backend(True, args.repeat)
    print(f"{'case':<24}{'numba':>12}{'python':>12}{'speedup':>10}")
    for name, t_jit in jit["timings"].items():
        t_py = py["timings"][name]
        print(f"{name:<24}{t_jit * 1e3:>10.2f}ms{t_py * 1e3:>10.1f}ms{t_py / t_jit:>9.0f}x")


if __name__ == "__main__":
    main()
