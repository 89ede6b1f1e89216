"""Compare the compiled coding kernels against the pure-numpy path.

Times the per-sample coding step on the synthetic integer-shift setup
(d=30, q=3) and on a regular-dictionary setup (q=90), the two workloads the
compiled kernels target.

Run:  python benchmarks/kernel_bench.py [--n 400] [--reps 5]
"""

import argparse
import time

import numpy as np

from orbitlearn import kernels
from orbitlearn.coder import SolverConfig, code_sample, make_workspace
from orbitlearn.datagen import SyntheticShiftModel, gen_shift_dataset
from orbitlearn.groups import GroupModel
from orbitlearn.learner import init_generators


def time_backend(backend, g, gens, data, cfg, reps):
    kernels.use_backend(backend)
    ws = make_workspace(g, gens)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        for y in data:
            code_sample(g, gens, y, cfg, workspace=ws)
        times.append(time.perf_counter() - t0)
    kernels.use_backend(None)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=400)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    if not kernels.HAVE_COMPILED:
        print("compiled kernels not built; nothing to compare")
        return

    data, truth = gen_shift_dataset(SyntheticShiftModel(d=30, q=3, s=5, n=args.n, seed=7))
    cases = [
        ("intshift d=30 q=3", GroupModel("intshift", 30), truth, SolverConfig(lam=0.4, max_iters=5)),
        ("regular  d=30 q=90", GroupModel("regular", 30), init_generators(30, 90, seed=0),
         SolverConfig(lam=0.4, max_iters=5)),
    ]
    print(f"{args.n} samples, 5 coding iterations, best of {args.reps} reps\n")
    print(f"{'case':<22}{'pure (s)':>10}{'compiled (s)':>14}{'speedup':>9}")
    for name, g, gens, cfg in cases:
        pure = time_backend("pure", g, gens, data, cfg, args.reps)
        fast = time_backend("compiled", g, gens, data, cfg, args.reps)
        print(f"{name:<22}{pure:>10.3f}{fast:>14.3f}{pure / fast:>8.1f}x")


if __name__ == "__main__":
    main()
