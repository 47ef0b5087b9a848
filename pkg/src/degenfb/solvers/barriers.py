"""Explicit barrier functions with discrete sign audits.

Each barrier is evaluated on a grid and its defining differential inequality
is checked with the same finite differences the solvers use, restricted to
the subdomain on which it is claimed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fields import Grid, ScalarField, gradient, laplacian
from ..geometry import StarDomain, check_direction
from ..potentials import HFunction
from .common import BarrierRegimeError

KINDS = ("radial_super", "radial_sub", "slab_Q", "holder_seed")


@dataclass(frozen=True)
class Barrier:
    """Barrier of one of the kinds in :data:`KINDS`.

    Parameters by kind:

    - ``radial_super``: ``c_bar``; zero on ``|x| <= 1/2`` and
      ``c_bar log(2|x|)`` (2D) or ``c_bar (|x| - 1/2)`` (1D) outside.
    - ``radial_sub``: ``M``; ``M (|x|^-n - 1)``.
    - ``slab_Q``: ``A``, ``omega`` (unit, ``omega_n >= delta``), ``delta``,
      slab bounds ``eps`` and ``ell``; ``-|x' - (omega'/omega_n) x_n|^2 + A x_n^2 + x_n``.
    - ``holder_seed``: ``C``, ``alpha``, ``x0``, ``nu``, ``phi0`` and ``sign``
      (+1 or -1); ``phi0 + sign C |(x - x0) . nu|^(alpha/2)`` (positive part
      for ``sign = -1``).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BarrierRegimeError(f"unknown barrier kind {self.kind!r}")


@dataclass
class BarrierAudit:
    ok: bool
    checks: dict


def _radial_super(b, grid, hfun):
    n = grid.dim
    c = float(b.params["c_bar"])
    if c <= 0:
        raise BarrierRegimeError("c_bar must be positive")
    if hfun is not None:
        # gradient at |x| = 1/2 must lie in D
        slope = c if n == 1 else 2.0 * c
        if slope > hfun.domain.f_min:
            raise BarrierRegimeError(
                f"radial_super needs |grad v| = {slope:.6g} <= min f = {hfun.domain.f_min:.6g}")
    r = np.linalg.norm(grid.points(), axis=-1)
    if n == 1:
        v = c * np.maximum(r - 0.5, 0.0)
    else:
        v = np.where(r > 0.5, c * np.log(np.maximum(2.0 * r, 1.0)), 0.0)
    f = ScalarField(grid, v)
    lap = laplacian(f).values
    grad = gradient(f, "centered")
    region = (r > 0.5 + 1.5 * grid.h) & (r < 1.0) & ~grid.box_edge_mask()
    checks = {"laplacian_max": float(lap[region].max()) if np.any(region) else 0.0}
    ok = True
    if hfun is not None:
        rhs = hfun(grad) / np.maximum(v, 1e-300)
        diff = lap - rhs
        checks["supersolution_max"] = float(diff[region].max())
        ok &= checks["supersolution_max"] <= 1e-10
        checks["gradient_at_half"] = c if n == 1 else 2.0 * c
    return f, BarrierAudit(bool(ok), checks)


def _radial_sub(b, grid, hfun):
    n = grid.dim
    M = float(b.params["M"])
    if M <= 0:
        raise BarrierRegimeError("M must be positive")
    r = np.linalg.norm(grid.points(), axis=-1)
    # capped inside |x| < 1/4, where the barrier is never used
    f = ScalarField(grid, M * (np.maximum(r, 0.25) ** (-n) - 1.0))
    lap = laplacian(f).values
    region = (r > 0.5) & (r < 1.0) & ~grid.box_edge_mask()
    checks = {"laplacian_min": float(lap[region].min())}
    # exact gradient modulus on |x| = 1 is n M
    checks["grad_at_one"] = n * M
    checks["grad_at_one_discrete"] = float(np.linalg.norm(
        gradient(f, "centered")[np.abs(r - 1.0) <= 0.5 * grid.h], axis=-1).min()) if np.any(
        np.abs(r - 1.0) <= 0.5 * grid.h) else float("nan")
    ok = checks["laplacian_min"] > 0.0 and checks["grad_at_one"] >= M
    if hfun is not None:
        checks["gradient_outside_D"] = bool(n * M > hfun.domain.f_max)
    return f, BarrierAudit(bool(ok), checks)


def _slab_Q(b, grid, hfun):
    if grid.dim != 2:
        raise BarrierRegimeError("slab_Q is implemented in two dimensions")
    omega = check_direction(b.params.get("omega", (0.0, 1.0)), 2)
    delta = float(b.params.get("delta", omega[1]))
    A = float(b.params["A"])
    eps = float(b.params.get("eps", 0.05))
    ell = float(b.params.get("ell", 0.25))
    if omega[1] < delta:
        raise BarrierRegimeError(f"omega_n = {omega[1]:.6g} < delta = {delta:.6g}")
    need = (grid.dim - 1) + delta ** -2
    if A <= need:
        raise BarrierRegimeError(f"slab_Q needs A > (n-1) + delta^-2 = {need:.6g}, got {A}")
    k = omega[0] / omega[1]
    x = grid.points()
    q = -(x[..., 0] - k * x[..., 1]) ** 2 + A * x[..., 1] ** 2 + x[..., 1]
    f = ScalarField(grid, q)
    lap = laplacian(f).values
    grad = gradient(f, "centered")
    slab = ((np.abs(x[..., 0]) <= 0.5) & (x[..., 1] >= -2.0 * eps) & (x[..., 1] <= ell)
            & ~grid.box_edge_mask())
    dirderiv = grad @ omega
    checks = {"laplacian_min": float(lap[slab].min()),
              "omega_dot_grad_min": float(dirderiv[slab].min()),
              "laplacian_exact": 2.0 * A - 2.0 - 2.0 * k * k}
    ok = checks["laplacian_min"] > 0.0 and checks["omega_dot_grad_min"] > 0.0
    return f, BarrierAudit(bool(ok), checks)


def _holder_seed(b, grid, hfun):
    C = float(b.params["C"])
    alpha = float(b.params["alpha"])
    sign = float(b.params.get("sign", 1.0))
    x0 = np.asarray(b.params.get("x0", np.zeros(grid.dim)), dtype=float)
    nu = check_direction(b.params.get("nu", np.eye(grid.dim)[-1]), grid.dim)
    phi0 = float(b.params.get("phi0", 0.0))
    if C <= 0 or not 0 < alpha <= 1:
        raise BarrierRegimeError("holder_seed needs C > 0 and alpha in (0, 1]")
    d = np.abs((grid.points() - x0) @ nu)
    v = phi0 + sign * C * d ** (0.5 * alpha)
    if sign < 0:
        v = np.maximum(v, 0.0)
    f = ScalarField(grid, v)
    checks = {"value_at_x0": phi0}
    ok = True
    if hfun is not None and sign > 0:
        if alpha > 2.0 / (1.0 + hfun.C_h) + 1e-14:
            raise BarrierRegimeError("holder_seed needs alpha <= 2/(1 + C_h)")
        lap = laplacian(f).values
        grad = gradient(f, "centered")
        sel = (d > 2 * grid.h) & (v > 0) & ~grid.box_edge_mask() & ~hfun.domain.contains(grad)
        if np.any(sel):
            res = lap[sel] - hfun(grad[sel]) / v[sel]
            checks["supersolution_max"] = float(res.max())
            ok = checks["supersolution_max"] <= 1e-10
    return f, BarrierAudit(bool(ok), checks)


def barrier_eval(b: Barrier, grid: Grid, hfun: HFunction | None = None):
    """Evaluate a barrier on ``grid``; returns ``(field, BarrierAudit)``."""
    fn = {"radial_super": _radial_super, "radial_sub": _radial_sub,
          "slab_Q": _slab_Q, "holder_seed": _holder_seed}[b.kind]
    return fn(b, grid, hfun)


def radial_super_max_cbar(dom: StarDomain, dim: int = 2) -> float:
    """Largest ``c_bar`` keeping the radial barrier gradient inside ``D``."""
    return dom.f_min if dim == 1 else 0.5 * dom.f_min


def slab_min_A(delta: float, dim: int = 2) -> float:
    """Lower bound ``(n-1) + delta^-2`` for the slab parameter ``A``."""
    return (dim - 1) + delta ** -2
