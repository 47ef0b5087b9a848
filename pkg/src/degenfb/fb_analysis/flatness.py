"""Flatness of ``w`` against the cone family ``f(nu)(x . nu)^+``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fields import GridError, ResolutionError, ScalarField
from ..geometry import StarDomain, check_direction

N_ANGLES = 256
MIN_RADIUS = 4.0       # smallest admissible radius, in units of h
GOLDEN_TOL = 1e-10
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _ball(w: ScalarField, x0, r: float):
    g = w.grid
    if r < MIN_RADIUS * g.h - 1e-12:
        raise ResolutionError(f"radius {r:.4g} is below {MIN_RADIUS:g}h = {MIN_RADIUS * g.h:.4g}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if np.any(x0 - r < np.asarray(g.origin) - 1e-12) or np.any(
            x0 + r > np.asarray(g.upper) + 1e-12):
        raise GridError(f"ball of radius {r} at {x0.tolist()} is not inside the grid")
    d = g.points().reshape(-1, g.dim) - x0
    sel = np.einsum("ij,ij->i", d, d) <= (r + 1e-12) ** 2
    return d[sel], w.values.reshape(-1)[sel]


def cone_gap(d: np.ndarray, vals: np.ndarray, nus: np.ndarray, fnu: np.ndarray) -> np.ndarray:
    """Smallest ``eps >= 0`` with ``(L - eps)^+ <= w <= (L + eps)^+``, ``L = f(nu) d . nu``.

    ``d`` are node offsets from the centre, ``nus`` is ``(k, dim)``; returns
    one gap per direction.
    """
    pos = vals > 0.0
    out = np.empty(nus.shape[0])
    step = max(1, 4_000_000 // max(d.shape[0], 1))
    for s in range(0, nus.shape[0], step):
        L = (d @ nus[s:s + step].T) * fnu[s:s + step]
        diff = vals[:, None] - L
        lower = np.max(-diff, axis=0)
        upper = np.max(np.where(pos[:, None], diff, -np.inf), axis=0) if np.any(pos) else 0.0
        out[s:s + step] = np.maximum(0.0, np.maximum(lower, upper))
    return out


@dataclass(frozen=True)
class FlatnessResult:
    """Normalised flatness ``eps`` (gap divided by ``r``) and its direction."""

    eps: float
    nu: np.ndarray
    f_nu: float
    r: float
    gap: float


def _direction(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def flatness(w: ScalarField, dom: StarDomain, x0, r: float, nu=None) -> FlatnessResult:
    """Best cone trapping of ``w`` on the nodes of ``B_r(x0)``.

    Scans ``N_ANGLES`` directions (ties go to the smaller index) and refines
    the best one by golden-section search on the neighbouring bracket. In
    one dimension the two directions are compared directly. Passing ``nu``
    fixes the direction.
    """
    if dom.dim != w.grid.dim:
        raise GridError("domain and grid dimensions differ")
    d, vals = _ball(w, x0, r)

    def gap(nus):
        nus = np.atleast_2d(nus)
        return cone_gap(d, vals, nus, np.atleast_1d(dom.f_of_nu(nus)))

    if nu is not None:
        nu = check_direction(nu, dom.dim)
        best, g = nu, float(gap(nu)[0])
    elif dom.dim == 1:
        cands = np.array([[1.0], [-1.0]])
        gaps = gap(cands)
        k = int(np.argmin(gaps))
        best, g = cands[k], float(gaps[k])
    else:
        thetas = 2.0 * np.pi * np.arange(N_ANGLES) / N_ANGLES
        gaps = gap(_direction(thetas))
        k = int(np.argmin(gaps))
        best, g = _direction(thetas[k]), float(gaps[k])
        if g > 0.0:
            step = 2.0 * np.pi / N_ANGLES
            a, b = thetas[k] - step, thetas[k] + step
            c, e = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
            gc, ge = gap(_direction(c))[0], gap(_direction(e))[0]
            while b - a > GOLDEN_TOL:
                if gc <= ge:
                    b, e, ge = e, c, gc
                    c = b - _INVPHI * (b - a)
                    gc = gap(_direction(c))[0]
                else:
                    a, c, gc = c, e, ge
                    e = a + _INVPHI * (b - a)
                    ge = gap(_direction(e))[0]
            t = 0.5 * (a + b)
            gt = float(gap(_direction(t))[0])
            if gt < g:
                best, g = _direction(t), gt
    best = np.asarray(best, dtype=float)
    return FlatnessResult(g / r, best, float(dom.f_of_nu(best)), float(r), g)


@dataclass
class FlatnessReport:
    """Flatness across dyadic radii about a free boundary point."""

    center: np.ndarray
    radii: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    nus: list = field(default_factory=list)
    f_nu: list = field(default_factory=list)

    @property
    def decay_ratios(self) -> list:
        """``eps(r/2)/eps(r)`` on normalised values (nan where ``eps(r) = 0``)."""
        out = []
        for a, b in zip(self.eps[:-1], self.eps[1:]):
            out.append(b / a if a > 0 else float("nan"))
        return out

    def rows(self) -> list[dict]:
        ratios = [float("nan")] + self.decay_ratios
        return [{"r": r, "eps": e, "nu": list(np.round(n, 15)), "f_nu": f, "ratio": q}
                for r, e, n, f, q in zip(self.radii, self.eps, self.nus, self.f_nu, ratios)]


def flatness_profile(w: ScalarField, dom: StarDomain, x0, r0: float,
                     r_min: float | None = None) -> FlatnessReport:
    """:func:`flatness` at ``r0, r0/2, ...`` down to ``r_min`` (default ``4h``)."""
    r_min = MIN_RADIUS * w.grid.h if r_min is None else r_min
    rep = FlatnessReport(np.asarray(x0, dtype=float).reshape(-1))
    r = float(r0)
    while r >= r_min - 1e-12:
        res = flatness(w, dom, x0, r)
        rep.radii.append(r)
        rep.eps.append(res.eps)
        rep.nus.append(res.nu)
        rep.f_nu.append(res.f_nu)
        r *= 0.5
    return rep
