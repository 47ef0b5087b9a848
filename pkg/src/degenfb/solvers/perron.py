"""Perron envelope built from Hoelder cone seeds, and inf-convolution."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..fields import Grid, ScalarField
from ..potentials import HFunction, residual_w
from .common import (BoundaryData, SeedParameterError, SolveReport, SolverConfig,
                     SolverError, Timer, optimal_omega)
from .degenerate import relax_degenerate
from .variational import _adjacent


def _cone_family(pts, x0, nu, phi, C, expo, sign, chunk=256):
    """``min`` (sign=+1) or ``max`` (sign=-1) over k of ``phi_k + sign C |(x-x_k).nu_k|^expo``."""
    out = np.full(pts.shape[0], np.inf if sign > 0 else -np.inf)
    for s in range(0, x0.shape[0], chunk):
        d = np.abs(np.einsum("nkd,kd->nk", pts[:, None, :] - x0[None, s:s + chunk],
                             nu[s:s + chunk]))
        vals = phi[None, s:s + chunk] + sign * C * d ** expo
        out = np.minimum(out, vals.min(axis=1)) if sign > 0 else np.maximum(out, vals.max(axis=1))
    return out


def seed_lengths(bd: BoundaryData, grid: Grid, samples: int):
    pts, nu, phi = bd.samples(grid, samples)
    nodes = grid.points().reshape(-1, grid.dim)
    ext = np.concatenate([nodes, pts])
    L = 0.0
    for s in range(0, pts.shape[0], 256):
        d = np.abs(np.einsum("nkd,kd->nk", ext[:, None, :] - pts[None, s:s + 256], nu[s:s + 256]))
        L = max(L, float(d.max()))
    return pts, nu, phi, L


def check_seed_parameters(bd: BoundaryData, grid: Grid, hfun: HFunction, C: float,
                          alpha: float, samples: int = 1024) -> dict:
    """Verify the three admissibility inequalities for the cone seeds.

    1. ``alpha/2 (alpha/2 - 1) <= -C_h alpha^2 / 4``, i.e. ``alpha <= 2/(1 + C_h)``;
    2. ``C (alpha/2) L^(alpha/2 - 1) > max f`` so the cone gradients leave ``D``
       on the whole domain (``L`` = largest normal distance);
    3. ``|phi(x_l) - phi(x_k)| <= C |(x_l - x_k) . nu_k|^(alpha/2)`` on the
       boundary samples, so the seeds reproduce the data.
    """
    if not 0.0 < alpha <= 1.0:
        raise SeedParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if not C > 0.0:
        raise SeedParameterError("C must be positive")
    lhs = 0.5 * alpha * (0.5 * alpha - 1.0)
    rhs = -0.25 * hfun.C_h * alpha ** 2
    if lhs > rhs + 1e-14:
        raise SeedParameterError(
            f"inequality alpha/2(alpha/2-1) <= -C_h alpha^2/4 fails: {lhs:.6g} > {rhs:.6g} "
            f"(need alpha <= {2.0 / (1.0 + hfun.C_h):.6g})")
    pts, nu, phi, L = seed_lengths(bd, grid, samples)
    slope = C * 0.5 * alpha * L ** (0.5 * alpha - 1.0)
    if slope <= hfun.domain.f_max:
        raise SeedParameterError(
            f"gradient-exit inequality C (alpha/2) L^(alpha/2-1) > max f fails: "
            f"{slope:.6g} <= {hfun.domain.f_max:.6g} (L = {L:.6g})")
    need = _holder_constant(pts, nu, phi, alpha)
    if need > C * (1.0 + 1e-12):
        raise SeedParameterError(
            f"boundary Hoelder inequality |phi(x1)-phi(x0)| <= C|(x1-x0).nu|^(alpha/2) "
            f"fails: need C >= {need:.6g}, got {C:.6g}")
    return {"L": L, "gradient_exit_slope": slope, "holder_needed": need}


def _holder_constant(pts, nu, phi, alpha):
    need = 0.0
    for s in range(0, pts.shape[0], 256):
        d = np.abs(np.einsum("nkd,kd->nk", pts[:, None, :] - pts[None, s:s + 256], nu[s:s + 256]))
        dphi = np.abs(phi[:, None] - phi[None, s:s + 256])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dphi > 1e-14, dphi / d ** (0.5 * alpha), 0.0)
        need = max(need, float(np.nanmax(np.where(np.isfinite(ratio), ratio, np.inf))))
    return need


def default_seed_parameters(bd: BoundaryData, grid: Grid, hfun: HFunction,
                            samples: int = 1024, margin: float = 1.25):
    """Largest admissible ``alpha`` and the smallest admissible ``C`` times ``margin``."""
    alpha = min(1.0, 2.0 / (1.0 + hfun.C_h))
    pts, nu, phi, L = seed_lengths(bd, grid, samples)
    c_exit = hfun.domain.f_max / (0.5 * alpha * L ** (0.5 * alpha - 1.0))
    c_hold = _holder_constant(pts, nu, phi, alpha)
    return margin * max(c_exit, c_hold), alpha


def _seed(bd, grid, C, alpha, sign, samples):
    pts, nu, phi = bd.samples(grid, samples)
    nodes = grid.points().reshape(-1, grid.dim)
    vals = _cone_family(nodes, pts, nu, phi, C, 0.5 * alpha, sign).reshape(grid.shape)
    if sign < 0:
        vals = np.maximum(vals, 0.0)
    mask = bd.mask(grid)
    vals = np.where(mask, bd(grid.points()), vals)
    return ScalarField(grid, vals, mask)


def supersolution_seed(bd: BoundaryData, grid: Grid, C: float, alpha: float,
                       hfun: HFunction | None = None, samples: int = 1024) -> ScalarField:
    """``inf_k phi(x_k) + C |(x - x_k) . nu_k|^(alpha/2)`` over boundary samples.

    With ``hfun`` the admissibility inequalities are checked first.
    """
    if hfun is not None:
        check_seed_parameters(bd, grid, hfun, C, alpha, samples)
    return _seed(bd, grid, C, alpha, +1.0, samples)


def subsolution_seed(bd: BoundaryData, grid: Grid, C: float, alpha: float,
                     hfun: HFunction | None = None, samples: int = 1024) -> ScalarField:
    """``sup_k (phi(x_k) - C |(x - x_k) . nu_k|^(alpha/2))^+`` over boundary samples."""
    if hfun is not None:
        check_seed_parameters(bd, grid, hfun, C, alpha, samples)
    return _seed(bd, grid, C, alpha, -1.0, samples)


def supersolution_audit(psi: ScalarField, hfun: HFunction, tol: float = 1e-8,
                        margin: int = 1) -> dict:
    """Sign of ``Delta psi - h(grad psi)/psi`` where ``grad psi`` lies outside ``D``.

    Nodes within ``margin`` cells of the Dirichlet set are skipped: there the
    seed has a ``dist^(alpha/2)`` boundary layer thinner than ``h`` and the
    five-point stencil cannot resolve it.
    """
    from ..fields import gradient

    res = residual_w(psi, hfun, threshold=0.0, blend=0.0)
    grad = gradient(psi, "centered")
    near = ~res.mask
    for _ in range(margin):
        near = near | _adjacent(near)
    outside = ~hfun.domain.contains(grad) & res.mask & ~near
    worst = float(res.field.values[outside].max()) if np.any(outside) else -np.inf
    return {"max_residual": worst, "nodes": int(outside.sum()), "ok": bool(worst <= tol)}


def inf_convolution(psi: ScalarField, C: float, alpha: float) -> ScalarField:
    """``min_y psi(y) + 2C |x - y|^(alpha/2)`` over all nodes (brute force)."""
    pts = psi.grid.points().reshape(-1, psi.grid.dim)
    out = kernels.inf_convolution(psi.values.reshape(-1), pts, 2.0 * C, 0.5 * alpha)
    return psi.with_values(out.reshape(psi.grid.shape))


def holder_seminorm(f: ScalarField, exponent: float) -> float:
    """``max_{x != y} |f(x) - f(y)| / |x - y|^exponent`` over all node pairs."""
    pts = f.grid.points().reshape(-1, f.grid.dim)
    v = f.values.reshape(-1)
    best = 0.0
    for s in range(0, pts.shape[0], 512):
        d = np.sqrt(((pts[s:s + 512, None, :] - pts[None]) ** 2).sum(-1))
        dv = np.abs(v[s:s + 512, None] - v[None])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, dv / d ** exponent, 0.0)
        best = max(best, float(q.max()))
    return best


def _patches(shape, cells):
    """Overlapping patch slices (stride cells/2) in lexicographic order."""
    stride = max(1, cells // 2)
    starts = []
    for n in shape:
        last = max(0, n - 1 - cells)
        s = list(range(0, last + 1, stride))
        if s[-1] != last:
            s.append(last)
        starts.append(s)
    if len(shape) == 1 or shape[1] == 1:
        return [(slice(i, i + cells + 1), slice(None)) for i in starts[0]]
    return [(slice(i, i + cells + 1), slice(j, j + cells + 1))
            for i in starts[0] for j in starts[1]]


def perron_envelope(bd: BoundaryData, hfun: HFunction, grid: Grid,
                    cfg: SolverConfig | None = None) -> tuple[ScalarField, SolveReport]:
    """Lower the supersolution seed by patchwise replacement until it settles.

    Patches of ``cfg.patch_cells`` cells overlap by half and are visited in
    lexicographic order. On each patch the stencil problem is solved with
    the patch rim frozen, and the iterate is replaced by the pointwise
    minimum of itself and the patch solution. The result is audited against
    the subsolution seed.
    """
    cfg = cfg or SolverConfig(scheme="perron")
    if grid.dim != hfun.domain.dim:
        raise SolverError("dimension of h does not match the grid")
    if cfg.seed_C is None or cfg.seed_alpha is None:
        C0, a0 = default_seed_parameters(bd, grid, hfun, cfg.seed_samples)
    C = cfg.seed_C if cfg.seed_C is not None else C0
    alpha = cfg.seed_alpha if cfg.seed_alpha is not None else a0
    info = check_seed_parameters(bd, grid, hfun, C, alpha, cfg.seed_samples)
    psi = supersolution_seed(bd, grid, C, alpha, samples=cfg.seed_samples)
    phi = subsolution_seed(bd, grid, C, alpha, samples=cfg.seed_samples)
    gap = float((phi.values - psi.values).max())
    if gap > 1e-12:
        raise SeedParameterError(
            f"seed ordering violated: subsolution exceeds supersolution by {gap:.3g}; "
            "increase C")
    rep = SolveReport("perron")
    rep.extra.update(seed_C=C, seed_alpha=alpha, **info)
    w = psi.array2d()
    fixed = psi.mask2d()
    h = grid.h
    cells = min(cfg.patch_cells, min(n - 1 for n in w.shape if n > 1))
    patches = _patches(w.shape, cells)
    sub_grid = Grid((0.0,) * grid.dim, h, (cells,) * grid.dim)
    omega = cfg.omega or optimal_omega(sub_grid)
    passes = 0
    with Timer() as t:
        sweeps = 0
        for passes in range(1, cfg.max_passes + 1):
            drop = 0.0
            for sl in patches:
                sub = w[sl].copy()
                sub_fixed = fixed[sl].copy()
                sub_fixed[0] = sub_fixed[-1] = True
                if sub.shape[1] > 1:
                    sub_fixed[:, 0] = sub_fixed[:, -1] = True
                if sub_fixed.all():
                    continue
                it, *_ = relax_degenerate(sub, sub_fixed, sub_grid, hfun, cfg, omega,
                                          cfg.patch_max_sweeps, residual_every=False)
                sweeps += it
                new = np.minimum(w[sl], sub)
                drop = max(drop, float((w[sl] - new).max()))
                w[sl] = new
            if drop <= cfg.tol_change:
                break
    rep.wall_time = t.elapsed
    rep.iterations = passes
    rep.extra["patch_sweeps"] = sweeps
    rep.change_last = drop
    out = ScalarField(grid, w.reshape(grid.shape), psi.boundary_mask)
    res = residual_w(out, hfun, floor=cfg.floor * h, blend=cfg.blend * h)
    rep.residual_sup, rep.residual_l2 = res.sup, res.l2
    lower = float((phi.values - out.values).max())
    upper = float((out.values - psi.values).max())
    rep.extra["below_subsolution"] = max(lower, 0.0)
    rep.extra["above_supersolution"] = max(upper, 0.0)
    rep.converged = bool(drop <= cfg.tol_change and res.sup <= cfg.tol_residual)
    if not rep.converged:
        rep.flags.append("max_iters")
    if lower > 1e-9:
        rep.flags.append("below_subsolution_seed")
    rep.extra["subsolution_seed"] = phi
    rep.extra["supersolution_seed"] = psi
    return out, rep
