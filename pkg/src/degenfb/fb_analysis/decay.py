"""Harnack decay of trapping offsets and one step of improvement of flatness."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import StarDomain, check_direction
from ..fields import ScalarField
from .flatness import _ball, cone_gap, flatness

HARNACK_FLOOR = 8.0     # smallest scale, in units of h
DEFAULT_CPOS = 0.5      # positivity cut for the affine fit, in units of h


class TrappingError(ValueError):
    """The field is not trapped as claimed at the entry scale."""


class FlatnessPreconditionError(ValueError):
    """The field is not flat enough for an improvement step."""


def trapping_offsets(w: ScalarField, x0, nu, r: float, f_nu: float):
    """Tightest ``(a, b)`` with ``(y + a)^+ <= w/f_nu <= (y + b)^+`` on ``B_r(x0)``.

    ``y = (x - x0) . nu``. ``a = min(w/f - y)`` over all nodes and
    ``b = max(w/f - y)`` over positive nodes.
    """
    d, vals = _ball(w, x0, r)
    y = d @ nu
    q = vals / f_nu - y
    pos = vals > 0.0
    b = float(q[pos].max()) if np.any(pos) else float(-y.min())
    return float(q.min()), b


@dataclass
class HarnackReport:
    center: np.ndarray
    nu: np.ndarray
    radii: list = field(default_factory=list)
    a: list = field(default_factory=list)
    b: list = field(default_factory=list)

    @property
    def widths(self) -> list:
        return [bb - aa for aa, bb in zip(self.a, self.b)]

    @property
    def ratios(self) -> list:
        w = self.widths
        return [(q / p if p > 0 else float("nan")) for p, q in zip(w[:-1], w[1:])]

    @property
    def holder_exponent(self) -> float | None:
        """Slope of ``log(b_m - a_m)`` against ``log r_m``."""
        w = np.asarray(self.widths)
        r = np.asarray(self.radii)
        ok = w > 0
        if ok.sum() < 2:
            return None
        return float(np.polyfit(np.log(r[ok]), np.log(w[ok]), 1)[0])

    def rows(self) -> list[dict]:
        ratios = [float("nan")] + self.ratios
        return [{"r": r, "a": a, "b": b, "width": b - a, "ratio": q}
                for r, a, b, q in zip(self.radii, self.a, self.b, ratios)]


def harnack_decay(w: ScalarField, dom: StarDomain, x0=None, nu=None, r: float = 0.5,
                  eta_scale: float = 0.5, floor: float | None = None,
                  entry: tuple | None = None) -> HarnackReport:
    """Trapping offsets ``(a_m, b_m)`` at radii ``r eta_scale^m`` down to ``floor``.

    ``w`` is normalised by ``f(nu)``. ``entry = (a0, b0)`` asserts a trapping
    at scale ``r``; a field that violates it raises :class:`TrappingError`.
    """
    g = w.grid
    x0 = np.zeros(g.dim) if x0 is None else np.asarray(x0, dtype=float)
    nu = np.eye(g.dim)[-1] if nu is None else check_direction(nu, g.dim)
    floor = HARNACK_FLOOR * g.h if floor is None else floor
    if not 0.0 < eta_scale < 1.0:
        raise ValueError("eta_scale must lie in (0, 1)")
    f_nu = float(dom.f_of_nu(nu))
    rep = HarnackReport(x0, nu)
    rm = float(r)
    while rm >= floor - 1e-12:
        a, b = trapping_offsets(w, x0, nu, rm, f_nu)
        if not rep.radii and entry is not None:
            a0, b0 = entry
            if a < a0 - 1e-12 or b > b0 + 1e-12:
                raise TrappingError(
                    f"trapping ({a0:.4g}, {b0:.4g}) violated at r = {rm:.4g}: "
                    f"tightest offsets are ({a:.4g}, {b:.4g})")
        rep.radii.append(rm)
        rep.a.append(a)
        rep.b.append(b)
        rm *= eta_scale
    return rep


@dataclass(frozen=True)
class ImprovementReport:
    a_vector: np.ndarray
    before: float
    after: float
    after_optimal: float
    nu_before: np.ndarray
    nu_after: np.ndarray
    omega: np.ndarray
    a_dot_omega: float
    n_fit: int
    R: float
    r: float

    @property
    def reduction(self) -> float:
        return 1.0 - self.after / self.before if self.before > 0 else 0.0


def improvement_of_flatness(w: ScalarField, dom: StarDomain, x0=None, r: float = 0.25,
                            R: float = 1.0, nu=None, eps0: float = 0.1,
                            c_pos: float = DEFAULT_CPOS) -> ImprovementReport:
    """One improvement step from scale ``R`` to scale ``r``.

    ``before`` is the normalised flatness in the fixed direction ``nu``
    (default ``e_n``) on ``B_R``. The normalised difference
    ``(w/f(nu) - x . nu)/eps`` is fitted by ``c + a . x`` on
    ``B_r cap {w > c_pos h}``; the new direction is ``nu + eps a`` normalised
    and ``after`` is the normalised flatness on ``B_r`` in that direction.
    ``omega`` is the outer normal of ``D`` at ``f(nu) nu``.
    """
    g = w.grid
    x0 = np.zeros(g.dim) if x0 is None else np.asarray(x0, dtype=float)
    nu = np.eye(g.dim)[-1] if nu is None else check_direction(nu, g.dim)
    f0 = float(dom.f_of_nu(nu))
    d, vals = _ball(w, x0, R)
    gap0 = float(cone_gap(d, vals, nu[None], np.array([f0]))[0])
    before = gap0 / R
    if before > eps0:
        raise FlatnessPreconditionError(
            f"normalised flatness {before:.4g} exceeds eps0 = {eps0:.4g}")
    d, vals = _ball(w, x0, r)
    sel = vals > c_pos * g.h
    if sel.sum() < g.dim + 2:
        raise FlatnessPreconditionError("too few positive nodes for the affine fit")
    eps = max(before, 1e-300)
    wt = (vals[sel] / f0 - d[sel] @ nu) / eps
    A = np.column_stack([np.ones(sel.sum()), d[sel]])
    coef = np.linalg.lstsq(A, wt, rcond=None)[0]
    a = coef[1:]
    nu_new = nu + eps * a
    nu_new = nu_new / np.linalg.norm(nu_new)
    after = flatness(w, dom, x0, r, nu=nu_new).eps
    after_opt = flatness(w, dom, x0, r).eps if g.dim == 2 else after
    omega = np.asarray(dom.normal_at(nu), dtype=float).reshape(-1)
    return ImprovementReport(a, before, after, after_opt, nu, nu_new, omega,
                             float(a @ omega), int(sel.sum()), float(R), float(r))
