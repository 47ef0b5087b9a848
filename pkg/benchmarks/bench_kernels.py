"""Time the hot kernels under the numba and numpy backends.

Usage: ``python3 benchmarks/bench_kernels.py [--n 256] [--repeat 5]``

Every kernel runs on identical inputs under both backends; the script prints
the best wall time per backend, the speed-up and the largest absolute
difference between the two outputs.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from degenfb import kernels, use_backend
from degenfb.fields import Grid
from degenfb.linearized import LinearizedProblem, half_ball_fixed, half_ball_grid, stencil
from degenfb.potentials import h_quadratic


def _cases(n: int):
    rng = np.random.default_rng(0)
    g = Grid.box(1.0, n)
    x, y = g.mesh()
    fixed = g.ball_mask(1.0)
    cone = np.maximum(y, 0.0) / np.sqrt(2.0)
    u0 = np.where(fixed, 0.5 * np.maximum(y, 0.0) ** 2, 0.25)
    hargs = h_quadratic(1.0).kernel_args()
    lp = LinearizedProblem.laplacian(0.5)
    lg = half_ball_grid(n // 2)
    lfix = half_ball_fixed(lg)
    coef = stencil(lp, lg)
    lx, ly = lg.mesh()
    phi0 = np.where(lfix, -lx ** 2 + (1 / 1.5) * ly ** 2, 0.0)
    pts = rng.random((4000, 2))
    tgt = rng.random((800, 2))
    vals = rng.random(pts.shape[0])
    h = g.h
    return {
        "obstacle_sweep": (lambda: u0.copy(),
                           lambda u: kernels.obstacle_sweep(u, fixed, np.ones_like(u), h, 1.9)),
        "alt_phillips_sweep": (lambda: u0.copy(),
                               lambda u: kernels.alt_phillips_sweep(u, fixed, h, 0.5, 1.9)),
        "degenerate_sweep": (lambda: np.where(fixed, cone, cone + 0.05),
                             lambda w: kernels.degenerate_sweep(w, fixed, h, 0.5 * h, 0.7, 1.0,
                                                                3 * h, 0.5 * h, 1e-6 * h,
                                                                hargs)),
        "stencil9_sweep": (lambda: phi0.copy(),
                           lambda p: kernels.stencil9_sweep(p, lfix, coef, np.zeros_like(p),
                                                            1.9)),
        "inf_convolution": (lambda: None,
                            lambda _: kernels.inf_convolution(vals, pts, 2.0, 0.25)),
        "min_distances": (lambda: None, lambda _: kernels.min_distances(pts, tgt)),
    }


def _time(make, run, repeat, sweeps):
    best = np.inf
    out = None
    for _ in range(repeat):
        state = make()
        t0 = time.perf_counter()
        for _ in range(sweeps):
            r = run(state)
        best = min(best, time.perf_counter() - t0)
        out = state if state is not None else r
    return best, np.asarray(out)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=256, help="cells per axis (default 256)")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sweeps", type=int, default=10, help="sweeps per timing")
    args = ap.parse_args(argv)
    cases = _cases(args.n)
    # warm up the JIT so compile time is not measured
    with use_backend("numba"):
        for make, run in cases.values():
            run(make())
    print(f"{'kernel':<20} {'numba [s]':>11} {'numpy [s]':>11} {'speed-up':>9} {'max diff':>10}")
    for name, (make, run) in cases.items():
        with use_backend("numba"):
            t_nb, out_nb = _time(make, run, args.repeat, args.sweeps)
        with use_backend("numpy"):
            t_np, out_np = _time(make, run, args.repeat, args.sweeps)
        diff = float(np.max(np.abs(out_nb - out_np)))
        print(f"{name:<20} {t_nb:11.4g} {t_np:11.4g} {t_np / t_nb:9.1f} {diff:10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
