"""Obstacle problem and Alt-Phillips minimisation by relaxation sweeps."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..fields import Grid, ScalarField
from ..potentials import Potential, _weights, beta_of_gamma, energy_J
from .common import (SolveReport, SolverConfig, Timer, initial_guess, optimal_omega,
                     resolve_data)

FRONT_BAND = 64   # relaxation band around the front in a move, in cells


def _neighbour_sum(u):
    s = np.zeros_like(u)
    if u.shape[1] == 1:
        s[1:-1] = u[:-2] + u[2:]
    else:
        s[1:-1, 1:-1] = u[:-2, 1:-1] + u[2:, 1:-1] + u[1:-1, :-2] + u[1:-1, 2:]
    return s


def _free_interior(fixed):
    m = ~fixed.copy()
    m[0] = m[-1] = False
    if fixed.shape[1] > 1:
        m[:, 0] = m[:, -1] = False
    return m


def complementarity_residual(u: np.ndarray, fixed: np.ndarray, h: float,
                             rhs: float = 1.0) -> float:
    """``max |min(u, rhs - Delta_h u) * scale|`` on free nodes, in units of u.

    The second argument is multiplied by ``h^2/(2 dim)`` so that both entries
    measure a nodal correction.
    """
    kk = 2.0 if u.shape[1] == 1 else 4.0
    lap_scaled = _neighbour_sum(u) / kk - u          # = h^2 Delta u / kk
    r = np.minimum(u, rhs * h * h / kk - lap_scaled)
    free = _free_interior(fixed)
    return float(np.max(np.abs(r[free]))) if np.any(free) else 0.0


def solve_obstacle(data, grid: Grid | None = None, cfg: SolverConfig | None = None,
                   rhs: float = 1.0) -> tuple[ScalarField, SolveReport]:
    """Projected SOR for ``u >= 0``, ``Delta u <= rhs``, ``u (Delta u - rhs) = 0``.

    Starts from the constant supersolution ``max(data)``. Exits once the
    scaled complementarity residual drops below ``cfg.tol_residual`` times
    ``max(1, max data)``.
    """
    data = resolve_data(data, grid)
    cfg = cfg or SolverConfig(scheme="obstacle", tol_residual=1e-12)
    g = data.grid
    u = initial_guess(data)
    fixed = data.mask2d()
    rhs_arr = np.full(u.shape, float(rhs))
    omega = cfg.omega or optimal_omega(g)
    scale = max(1.0, float(np.abs(u).max()))
    rep = SolveReport("obstacle")
    rep.extra["omega"] = omega
    wn = _weights(g)[0].reshape(u.shape)

    def energy(arr):
        # J with W(u) = rhs * u on u >= 0
        f = ScalarField(g, arr.reshape(g.shape), data.boundary_mask)
        return energy_J(f, 1.0) + (float(rhs) - 1.0) * float(np.sum(wn * np.maximum(arr, 0.0)))

    rep.energy_trace.append(energy(u))
    rep.energy_monotone = True
    with Timer() as t:
        res = np.inf
        for it in range(1, cfg.max_iters + 1):
            rep.change_last = kernels.obstacle_sweep(u, fixed, rhs_arr, g.h, omega)
            if it % cfg.check_every == 0 or rep.change_last == 0.0:
                rep.energy_trace.append(energy(u))
                e_prev, e = rep.energy_trace[-2:]
                if e > e_prev + 1e-12 * max(1.0, abs(e_prev)):
                    rep.energy_monotone = False
                res = complementarity_residual(u, fixed, g.h, rhs)
                if res <= cfg.tol_residual * scale:
                    break
        rep.iterations = it
    rep.wall_time = t.elapsed
    rep.residual_sup = res
    rep.converged = bool(res <= cfg.tol_residual * scale)
    if not rep.converged:
        rep.flags.append("max_iters")
    if not rep.energy_monotone:
        rep.flags.append("energy_increase")
    out = ScalarField(g, u.reshape(g.shape), data.boundary_mask)
    return out, rep


def euler_lagrange_residual(u: np.ndarray, fixed: np.ndarray, h: float, gamma: float,
                            t_reg: float) -> tuple[float, float]:
    """Raw and correction-scaled ``Delta_h u - W'(u)`` on ``{u > t_reg}``."""
    kk = 2.0 if u.shape[1] == 1 else 4.0
    pot = Potential(gamma, t_reg)
    lap = (_neighbour_sum(u) - kk * u) / (h * h)
    r = lap - pot.dW(u)
    sel = _free_interior(fixed) & (u > t_reg)
    if not np.any(sel):
        return 0.0, 0.0
    raw = float(np.max(np.abs(r[sel])))
    return raw, raw * h * h / kk


def _adjacent(mask: np.ndarray) -> np.ndarray:
    """Nodes with at least one axis neighbour in ``mask``."""
    out = np.zeros_like(mask)
    out[1:] |= mask[:-1]
    out[:-1] |= mask[1:]
    if mask.shape[1] > 1:
        out[:, 1:] |= mask[:, :-1]
        out[:, :-1] |= mask[:, 1:]
    return out


def _relax(u, fixed, h, gamma, omega, tol, max_sweeps):
    for _ in range(max_sweeps):
        if kernels.alt_phillips_sweep(u, fixed, h, gamma, omega) <= tol:
            break


def front_moves(u, fixed, h, gamma, omega, energy, max_moves, tol, max_sweeps) -> int:
    """Shift the discrete free boundary while the total energy drops.

    For ``gamma < 1`` every nearby front position is a local minimum of the
    lattice energy, so coordinate descent stops wherever the front first
    settles. An advance move holds the zero nodes next to the positive set at
    half their largest positive neighbour, relaxes, releases them and relaxes
    again; a retreat move does the same with the positive nodes next to the
    zero set held at 0. Relaxation is confined to ``FRONT_BAND`` cells around
    the front; a move is kept only when it lowers the total energy.
    Returns the number of accepted moves; ``u`` is updated in place.
    """
    accepted = 0
    e0 = energy(u)
    omega = min(omega, 2.0 / (1.0 + np.sin(np.pi / (2 * FRONT_BAND + 2))))
    free = ~fixed
    for _ in range(max_moves):
        improved = False
        for kind in ("advance", "retreat"):
            pos = u > 0.0
            if kind == "advance":
                sel = free & ~pos & _adjacent(pos)
            else:
                sel = free & pos & _adjacent(~pos)
            if not np.any(sel):
                continue
            band = sel.copy()
            for _ in range(FRONT_BAND):
                band |= _adjacent(band)
            frozen = fixed | ~band
            trial = u.copy()
            if kind == "advance":
                nb = np.zeros_like(u)
                nb[1:] = np.maximum(nb[1:], u[:-1])
                nb[:-1] = np.maximum(nb[:-1], u[1:])
                if u.shape[1] > 1:
                    nb[:, 1:] = np.maximum(nb[:, 1:], u[:, :-1])
                    nb[:, :-1] = np.maximum(nb[:, :-1], u[:, 1:])
                trial[sel] = 0.5 * nb[sel]
            else:
                trial[sel] = 0.0
            _relax(trial, frozen | sel, h, gamma, omega, tol, max_sweeps)
            _relax(trial, frozen, h, gamma, omega, tol, max_sweeps)
            e = energy(trial)
            if e < e0 - 1e-15 * max(1.0, abs(e0)):
                u[...] = trial
                e0 = e
                accepted += 1
                improved = True
        if not improved:
            break
    return accepted


def solve_alt_phillips(data, gamma: float, grid: Grid | None = None,
                       cfg: SolverConfig | None = None) -> tuple[ScalarField, SolveReport]:
    """Minimise the discrete Alt-Phillips energy by safeguarded coordinate descent.

    Each node is replaced by the exact minimiser of its local energy (then
    over-relaxed when that still lowers the local energy), so the energy
    trace is nonincreasing. For ``gamma < 1`` the energy is not convex and
    the converged state is then improved by :func:`front_moves`. Exit requires both a per-sweep energy decrease
    below ``tol_energy`` and a scaled Euler-Lagrange residual on
    ``{u > t_reg}`` below ``tol_residual``.
    """
    beta_of_gamma(gamma)
    data = resolve_data(data, grid)
    cfg = cfg or SolverConfig(scheme="alt_phillips", tol_residual=1e-12)
    g = data.grid
    t_reg = cfg.t_reg if cfg.t_reg is not None else g.h ** 2
    pot = Potential(gamma, t_reg)
    u = initial_guess(data)
    fixed = data.mask2d()
    omega = cfg.omega or optimal_omega(g)
    rep = SolveReport("alt_phillips")
    rep.extra.update(omega=omega, t_reg=t_reg, gamma=gamma)

    def energy(arr):
        return energy_J(ScalarField(g, arr.reshape(g.shape), data.boundary_mask), pot)

    scale = max(1.0, float(np.abs(u).max()))
    rep.energy_trace.append(energy(u))
    state = {"monotone": True, "it": 0}

    def descend():
        e_prev = rep.energy_trace[-1]
        for it in range(1, cfg.max_iters + 1):
            rep.change_last = kernels.alt_phillips_sweep(u, fixed, g.h, gamma, omega)
            e = energy(u)
            rep.energy_trace.append(e)
            if e > e_prev + 1e-12 * max(1.0, abs(e_prev)):
                state["monotone"] = False
            small = (e_prev - e) <= cfg.tol_energy * max(1.0, abs(e_prev))
            e_prev = e
            state["it"] += 1
            if small and (it % cfg.check_every == 0 or rep.change_last == 0.0):
                _, res_scaled = euler_lagrange_residual(u, fixed, g.h, gamma, t_reg)
                if res_scaled <= cfg.tol_residual * scale:
                    return

    with Timer() as t:
        descend()
        if gamma < 1.0 and cfg.fb_moves > 0:
            total = 0
            while total < cfg.fb_moves:
                moves = front_moves(u, fixed, g.h, gamma, omega, energy,
                                    cfg.fb_moves - total, cfg.tol_change * scale,
                                    cfg.max_iters)
                if not moves:
                    break
                total += moves
                rep.energy_trace.append(energy(u))
                descend()
            rep.extra["fb_moves"] = total
        rep.iterations = state["it"]
    rep.wall_time = t.elapsed
    raw, res_scaled = euler_lagrange_residual(u, fixed, g.h, gamma, t_reg)
    rep.residual_sup = raw
    rep.extra["residual_scaled"] = res_scaled
    rep.energy_monotone = state["monotone"]
    rep.converged = bool(res_scaled <= cfg.tol_residual * scale)
    if not rep.converged:
        rep.flags.append("max_iters")
    if not state["monotone"]:
        rep.flags.append("energy_increase")
    return ScalarField(g, u.reshape(g.shape), data.boundary_mask), rep
