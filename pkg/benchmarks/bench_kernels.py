"""Benchmark the numba kernel against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--n 20000] [--reps 30]

The same sweep also runs through a small end-to-end Monte Carlo cell so the
kernel share of total runtime is visible. Set TMGPANEL_NO_NUMBA=1 to force
the numpy path in a full run.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tmgpanel import _kernels
from tmgpanel import DgpConfig, run_experiment


def time_call(fn, *args, reps=30):
    fn(*args)  # warm-up / jit compile
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_gram_det_adj(n, reps):
    rng = np.random.default_rng(0)
    print(f"gram/det/adjugate sweep over n={n} units (best of {reps}):")
    print(f"{'T':>3} {'k':>3} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for T, k_prime in ((2, 1), (3, 1), (4, 2), (6, 3)):
        W = np.empty((n, T, k_prime + 1))
        W[:, :, 0] = 1.0
        W[:, :, 1:] = rng.normal(0, 1, (n, T, k_prime))
        t_np = time_call(_kernels._gram_det_adj_numpy, W, reps=reps)
        if _kernels.USE_NUMBA:
            t_nb = time_call(_kernels._gram_det_adj_nb, W, reps=reps)
            g1, d1, a1 = _kernels._gram_det_adj_numpy(W)
            g2, d2, a2 = _kernels._gram_det_adj_nb(W)
            assert np.allclose(d1, d2, rtol=1e-12) and np.allclose(a1, a2, rtol=1e-12)
            print(
                f"{T:>3} {k_prime + 1:>3} {t_np * 1e3:>12.3f} {t_nb * 1e3:>12.3f}"
                f" {t_np / t_nb:>8.2f}x"
            )
        else:
            print(f"{T:>3} {k_prime + 1:>3} {t_np * 1e3:>12.3f} {'n/a':>12} {'':>9}")


def bench_mc_cell():
    cfg = DgpConfig(n=1000, T=2, rho_alpha=0.5, rho_beta=0.5, kappa2=15.5, seed=1)
    run_experiment(cfg, ["tmg"], reps=2)  # warm-up
    t0 = time.perf_counter()
    run_experiment(cfg, ["fe", "mg", "tmg", "gp"], reps=200)
    dt = time.perf_counter() - t0
    path = "numba" if _kernels.USE_NUMBA else "numpy"
    print(f"\nend-to-end MC cell (n=1000, T=2, 200 reps, {path} path): {dt:.2f}s")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20000)
    parser.add_argument("--reps", type=int, default=30)
    args = parser.parse_args()
    print(f"numba kernels enabled: {_kernels.USE_NUMBA}")
    bench_gram_det_adj(args.n, args.reps)
    bench_mc_cell()


if __name__ == "__main__":
    main()
