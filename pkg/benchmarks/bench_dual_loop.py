"""Compiled vs pure-Python dual loop on T1 and a random CMDP.

Usage: python benchmarks/bench_dual_loop.py [--T 200000] [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from cmdplab import kernels
from cmdplab.core_mdp import t1_cmdp
from cmdplab.harness import random_cmdp
from cmdplab.lp_oracle import solve_cmdp_exact
from cmdplab.primal_dual import PdConfig, run_primal_dual, accuracy_schedule


def config_for(model, T):
    sol = solve_cmdp_exact(model)
    U = max(4.0, 4 * sol.lambda_star)
    _, _, eps_l = accuracy_schedule(U, sol.lambda_star, 0.01, model.gamma)
    return PdConfig(U=U, eps_net=eps_l, T=T, eta=U * (1 - model.gamma) / math.sqrt(T),
                    b_prime=model.b, eps_opt=0.01)


def best_time(fn, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernels.HAVE_COMPILED:
        print("compiled kernel not built; only the Python backend is available")
    models = {"T1": t1_cmdp(), "random S=8 A=4": random_cmdp(8, 4, 0.9, 3, 0.3)}
    print(f"{'instance':<16} {'backend':<9} {'seconds':>9} {'Miter/s':>9} {'speedup':>8}")
    for name, model in models.items():
        cfg = config_for(model, args.T)
        timings = {}
        traces = {}
        for backend in ("python", "compiled") if kernels.HAVE_COMPILED else ("python",):
            sec, res = best_time(lambda: run_primal_dual(model, cfg, backend=backend, record_trace=True),
                                 args.repeat)
            timings[backend] = sec
            traces[backend] = res.trace
        for backend, sec in timings.items():
            speed = timings["python"] / sec
            print(f"{name:<16} {backend:<9} {sec:9.3f} {args.T / sec / 1e6:9.2f} {speed:8.1f}x")
        if len(traces) == 2:
            same = (np.array_equal(traces["python"].grid_index, traces["compiled"].grid_index)
                    and np.array_equal(traces["python"].policy_id, traces["compiled"].policy_id))
            print(f"{name:<16} traces identical: {same}")


if __name__ == "__main__":
    main()
