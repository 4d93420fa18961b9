#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-Python/numpy fallback.

Run:  python3 benchmarks/bench_backends.py [--horizon 20000] [--runs 20]

The first numba call includes JIT compilation; the table reports the
steady-state per-call time for each backend on identical inputs, plus a
check that the outputs agree.
"""

import argparse
import time

import numpy as np

import laglearn as ll
import laglearn.simulate as sim
from laglearn import _kernels


def time_fn(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_traj(horizon, runs):
    inst = ll.build_fig1(0.01, p_star=0.01)
    pol = sim._resolve_policy(inst, ll.Myopic())
    lags = sim._lag_kernel_args(inst)
    hyp = inst.hypothesis_tensor()
    true_p = inst.true_state.probs
    mask = inst.true_hypothesis_mask()
    pre = np.array(inst.pre_history, dtype=np.int64)
    prior = inst.hypothesis_prior()

    def drive(backend):
        k = _kernels.kernel("traj", backend)
        out = []
        for i in range(runs):
            u = np.random.Generator(np.random.Philox(i)).random(horizon)
            logw = np.log(prior)
            actions = np.empty(horizon, np.int64)
            outcomes = np.empty(horizon, np.int64)
            post = np.empty(horizon)
            llr = np.empty((0, inst.n_hypotheses()))
            k(hyp, true_p, lags[0], lags[1], lags[2], lags[3], lags[4],
              lags[5], pol[0], pol[1], pol[2], pol[3], pol[4], pol[5],
              pol[6], logw, mask, pre, u, actions, outcomes, post, llr, 0, 0)
            out.append(actions.copy())
        return out

    drive("numba")  # compile before timing
    t_nb = time_fn(lambda: drive("numba"))
    t_py = time_fn(lambda: drive("numpy"), repeats=1)
    same = all(np.array_equal(a, b)
               for a, b in zip(drive("numba"), drive("numpy")))
    return t_nb, t_py, same


def bench_walk(n_walks, n_steps):
    rv = ll.FiniteRV([-1.0, 1.0], [0.75, 0.25])
    values = rv.values
    cum = np.cumsum(rv.probs)
    u = np.random.Generator(np.random.Philox(0)).random((n_walks, n_steps))

    def drive(backend):
        return _kernels.kernel("walk", backend)(u, values, cum, 2.0)

    drive("numba")
    t_nb = time_fn(lambda: drive("numba"))
    t_py = time_fn(lambda: drive("numpy"))
    c_nb, f_nb = drive("numba")
    c_py, f_py = drive("numpy")
    same = np.array_equal(c_nb, c_py) and np.array_equal(f_nb, f_py)
    return t_nb, t_py, same


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=20_000)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--walks", type=int, default=400)
    ap.add_argument("--steps", type=int, default=5_000)
    args = ap.parse_args()

    print(f"{'kernel':<12}{'numba (s)':>12}{'numpy (s)':>12}"
          f"{'speedup':>10}{'agree':>8}")
    t_nb, t_py, same = bench_traj(args.horizon, args.runs)
    print(f"{'trajectory':<12}{t_nb:>12.4f}{t_py:>12.4f}"
          f"{t_py / t_nb:>9.1f}x{str(same):>8}")
    t_nb, t_py, same = bench_walk(args.walks, args.steps)
    print(f"{'walk batch':<12}{t_nb:>12.4f}{t_py:>12.4f}"
          f"{t_py / t_nb:>9.1f}x{str(same):>8}")


if __name__ == "__main__":
    main()
