"""Compare the compiled path-stepping kernel against the numpy fallback.

Usage:  python benchmarks/bench_kernels.py [--paths 64] [--steps 200000]

The Euler-Maruyama stepper is the package's hot loop: a production Monte
Carlo run integrates tens of millions of sequential steps.  The numpy
fallback vectorizes across paths, so its per-step Python overhead is
amortized over the path count; the compiled kernel removes it entirely.
A Newton eigensolve is timed alongside for scale (it is sparse-LU bound
and shares no kernel code).
"""

import argparse
import time

import numpy as np

from ergohj._kernels import get_backend
from ergohj.grids import GridOptions, build_grid
from ergohj.model import ProblemSpec, build_coefficients
from ergohj.solver import solve_newton


def bench_em(mod, n_paths, n_steps, chunk=16384):
    spec = ProblemSpec(m=2.0, d=3, delta=0.0, rho=1.0, a=0.0, eta=2.0, R=1.0)
    params = build_coefficients(spec).kernel_params()
    ctrl_r = np.linspace(0.0, 400.0, 2048)
    ctrl_xi = -np.tanh(ctrl_r / 50.0)
    rng = np.random.default_rng(1)
    r = rng.uniform(20.0, 80.0, n_paths)
    acc = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    dW = rng.standard_normal((n_paths, chunk))
    # warm-up
    mod.em_chunk(r.copy(), acc.copy(), alive.copy(), 0, 0, dW[:, :128],
                 ctrl_r, ctrl_xi, params, 2.0, 3.0, 50.0, 2e-3, 1e-3, 4e3)
    t0 = time.perf_counter()
    done = 0
    while done < n_steps:
        k = min(chunk, n_steps - done)
        mod.em_chunk(r, acc, alive, done, 0, dW[:, :k], ctrl_r, ctrl_xi,
                     params, 2.0, 3.0, 50.0, 2e-3, 1e-3, 4e3)
        done += k
    dt = time.perf_counter() - t0
    return n_paths * n_steps / dt


def bench_newton():
    spec = ProblemSpec(m=2.0, d=3, delta=1.0, rho=1.0, a=0.0, eta=2.0, R=1.0)
    g = build_grid(spec, 1e4, GridOptions(n=2048))
    t0 = time.perf_counter()
    sol = solve_newton(spec, 1e4, g)
    return time.perf_counter() - t0, sol.newton_iters


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=64)
    ap.add_argument("--steps", type=int, default=200_000)
    args = ap.parse_args()

    rows = []
    for name in ("python", "cython"):
        try:
            mod, label = get_backend(name)
        except (ImportError, ValueError):
            print(f"{name:>8}: not available")
            continue
        rate = bench_em(mod, args.paths, args.steps)
        rows.append((label, rate))
        print(f"{label:>8}: {rate/1e6:8.2f} M path-steps/s "
              f"({args.paths} paths x {args.steps} steps)")
    if len(rows) == 2:
        print(f"speedup: {rows[1][1] / rows[0][1]:.1f}x (compiled over fallback)")

    wall, iters = bench_newton()
    print(f"\nreference Newton eigensolve (n=2048, beta=1e4): "
          f"{wall*1e3:.0f} ms, {iters} iterations")


if __name__ == "__main__":
    main()
