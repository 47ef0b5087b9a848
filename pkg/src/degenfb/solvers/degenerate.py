"""Damped nonlinear relaxation for ``Delta w = h(grad w)/w`` with free boundary."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..fields import Grid, ScalarField
from ..potentials import HFunction, residual_w
from .common import (SolveReport, SolverConfig, SolverError, Timer, initial_guess,
                     optimal_omega, resolve_data)


def _check_dims(data: ScalarField, hfun: HFunction):
    if data.grid.dim != hfun.domain.dim:
        raise SolverError("dimension of h does not match the grid")


# over-relaxation needs w >~ BAND_COEF h / (2 - omega); see over_relaxation_band
BAND_COEF = 0.15


def over_relaxation_band(cfg: SolverConfig, omega: float, h: float) -> float:
    """Smallest ``w`` (node and neighbours) at which ``omega`` is applied.

    The lagged term ``h(grad w)/w`` perturbs the node update by a relative
    amount of order ``h/w``, while the stability margin of SOR shrinks like
    ``2 - omega``. The band therefore grows like ``1/(2 - omega)`` once that
    exceeds ``cfg.band``.
    """
    return max(cfg.band, BAND_COEF / max(2.0 - omega, 1e-12)) * h


def relax_degenerate(w: np.ndarray, fixed: np.ndarray, grid: Grid, hfun: HFunction,
                     cfg: SolverConfig, omega: float, max_iters: int,
                     residual_every: bool = True):
    """Run sweeps in place until the change, residual and positivity settle.

    Returns ``(iterations, change, residual_report_or_None, stable, history)``
    where ``history`` keeps the last two distinct positivity sets.
    """
    h = grid.h
    args = hfun.kernel_args()
    eps_f = cfg.floor * h
    blend = cfg.blend * h
    band = over_relaxation_band(cfg, omega, h)
    snap = cfg.snap * h
    pos = w > 0.0
    stable = 0
    history = [pos.copy()]
    res = None
    change = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        change = kernels.degenerate_sweep(w, fixed, h, eps_f, cfg.theta, omega, band,
                                          blend, snap, args)
        new_pos = w > 0.0
        if np.array_equal(new_pos, pos):
            stable += 1
        else:
            stable = 0
            if not np.array_equal(new_pos, history[-1]):
                history = [history[-1], new_pos.copy()]
            pos = new_pos
        if change <= cfg.tol_change and stable >= cfg.stable_sweeps:
            if not residual_every:
                break
            if it % cfg.check_every == 0 or change == 0.0:
                f = ScalarField(grid, w.reshape(grid.shape), fixed.reshape(grid.shape))
                res = residual_w(f, hfun, floor=eps_f, blend=blend)
                if res.sup <= cfg.tol_residual:
                    break
    return it, change, res, stable >= cfg.stable_sweeps, history


def solve_degenerate(data, hfun: HFunction, grid: Grid | None = None,
                     cfg: SolverConfig | None = None,
                     initial: np.ndarray | None = None) -> tuple[ScalarField, SolveReport]:
    """Solve the degenerate free boundary problem by damped red-black sweeps.

    Each sweep solves, node by node, the stencil equation
    ``Delta_h w = h(grad_h w)/max(w, eps_f)`` for the value at the node with
    the gradient lagged, taking the largest nonnegative root (zero when none
    exists). Updates are damped by ``theta`` near the free boundary and
    over-relaxed by ``omega`` where the node and its neighbours exceed
    ``band``. The positivity set is re-derived every sweep. The default start
    is the constant supersolution ``max(data)``.
    """
    data = resolve_data(data, grid)
    _check_dims(data, hfun)
    cfg = cfg or SolverConfig()
    g = data.grid
    fixed = data.mask2d()
    if initial is None:
        w = initial_guess(data)
    else:
        w = np.where(fixed, data.array2d(), np.asarray(initial, dtype=float).reshape(fixed.shape))
    omega = cfg.omega or optimal_omega(g)
    rep = SolveReport("degenerate")
    rep.extra.update(omega=omega, theta=cfg.theta, floor=cfg.floor * g.h,
                     band=over_relaxation_band(cfg, omega, g.h))
    with Timer() as t:
        it, change, res, stable, history = relax_degenerate(
            w, fixed, g, hfun, cfg, omega, cfg.max_iters)
    rep.wall_time = t.elapsed
    rep.iterations = it
    rep.change_last = change
    out = ScalarField(g, w.reshape(g.shape), data.boundary_mask)
    res = residual_w(out, hfun, floor=cfg.floor * g.h, blend=cfg.blend * g.h)
    rep.residual_sup, rep.residual_l2 = res.sup, res.l2
    rep.positivity_stable = stable
    rep.converged = bool(stable and res.sup <= cfg.tol_residual)
    if not rep.converged:
        rep.flags.append("max_iters")
        if not stable and len(history) == 2:
            rep.flags.append("oscillating_positivity")
            rep.extra["candidate_sets"] = tuple(m.reshape(g.shape) for m in history)
    return out, rep
