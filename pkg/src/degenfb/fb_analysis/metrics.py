"""Quantitative surrogates: non-degeneracy, growth, gradient constraint, strip integrals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..fields import ResolutionError, ScalarField, gradient, sup_on_sphere
from ..geometry import Gauge
from ..potentials import DEFAULT_BLEND
from .boundary import FreeBoundary, extract_free_boundary

HAUSDORFF_LEVELS = (8.0, 16.0, 32.0)   # in units of h
MIN_LEVEL = 4.0                        # in units of h
COVER_FACTOR = 5.0
SUBSAMPLES = 8


def _fb(w: ScalarField, fb: FreeBoundary | None) -> FreeBoundary:
    return extract_free_boundary(w) if fb is None else fb


def nondegeneracy_constant(w: ScalarField, x0, radii) -> float:
    """``min_r sup_{|x - x0| = r} w / r`` over the given radii."""
    return float(min(sup_on_sphere(w, x0, r) / r for r in radii))


def linear_growth_check(w: ScalarField, fb: FreeBoundary | None = None,
                        mask: np.ndarray | None = None) -> float:
    """``max w(x)/dist(x, F(w))`` over positive nodes (brute-force distances).

    Positive means ``w > w_thresh``, the level used to extract ``F(w)``;
    nodes below it lie on the zero side of the extracted boundary. Returns
    ``nan`` when the free boundary is empty.
    """
    fb = _fb(w, fb)
    if fb.empty:
        return float("nan")
    v = w.values.reshape(-1)
    sel = v > fb.thresh
    if mask is not None:
        sel &= np.asarray(mask).reshape(-1)
    if not np.any(sel):
        return 0.0
    pts = w.grid.points().reshape(-1, w.grid.dim)[sel]
    d = kernels.min_distances(np.ascontiguousarray(pts), np.ascontiguousarray(fb.points))
    ratio = v[sel] / np.maximum(d, 1e-300)
    return float(np.max(ratio))


@dataclass(frozen=True)
class GradientConstraintReport:
    sup_eta: float
    xi_fit: float | None
    n_nodes: int
    n_violating: int
    band: float


def _fit_slope(x, y):
    if x.size < 3 or np.ptp(x) == 0.0:
        return None
    return float(np.polyfit(x, y, 1)[0])


def gradient_constraint_check(w: ScalarField, gauge: Gauge, band: float,
                              fb: FreeBoundary | None = None,
                              blend: float | None = None,
                              eta_floor: float = 1e-14) -> GradientConstraintReport:
    """``sup eta(grad w)`` over positive nodes within ``band`` of ``F(w)``.

    The gradient is the solvers' blended one-sided difference. ``xi_fit`` is
    the least-squares slope of ``log eta`` against ``log w`` over nodes with
    ``eta > eta_floor`` (``None`` with fewer than three such nodes).
    """
    fb = _fb(w, fb)
    g = w.grid
    blend = DEFAULT_BLEND * g.h if blend is None else blend
    v = w.values
    sel = (v > 0.0) & ~g.box_edge_mask()
    if fb.empty or not np.any(sel):
        return GradientConstraintReport(0.0, None, 0, 0, band)
    pts = g.points().reshape(-1, g.dim)[sel.reshape(-1)]
    d = kernels.min_distances(np.ascontiguousarray(pts), np.ascontiguousarray(fb.points))
    near = d <= band
    grad = gradient(w, "one_sided", blend=blend).reshape(-1, g.dim)[sel.reshape(-1)][near]
    eta = gauge(grad)
    vals = v.reshape(-1)[sel.reshape(-1)][near]
    viol = eta > eta_floor
    xi = _fit_slope(np.log(vals[viol]), np.log(eta[viol])) if np.any(viol) else None
    sup = float(eta.max()) if eta.size else 0.0
    return GradientConstraintReport(sup, xi, int(eta.size), int(viol.sum()), float(band))


@dataclass(frozen=True)
class EtaIntegralReport:
    value: float
    value_alt: float
    floors: tuple
    convexified: bool


def eta_integral(w: ScalarField, gauge: Gauge, floors: tuple | None = None,
                 region=None, blend: float | None = None) -> EtaIntegralReport:
    """Nodal quadrature of ``eta(grad w)^+ / max(w, floor)`` over positive nodes.

    Evaluated for two floors (default ``h/2`` and ``h``) to expose the
    sensitivity. ``region`` is an optional ``(center, radius)`` ball.
    """
    g = w.grid
    floors = (0.5 * g.h, g.h) if floors is None else tuple(floors)
    blend = DEFAULT_BLEND * g.h if blend is None else blend
    v = w.values
    sel = (v > 0.0) & ~g.box_edge_mask()
    if region is not None:
        c, rad = region
        sel &= np.linalg.norm(g.points() - np.asarray(c, dtype=float), axis=-1) <= rad
    grad = gradient(w, "one_sided", blend=blend)
    eta = np.maximum(gauge(grad[sel]), 0.0)
    vol = g.h ** g.dim
    vals = [float(np.sum(eta / np.maximum(v[sel], f)) * vol) for f in floors]
    return EtaIntegralReport(vals[0], vals[1], floors, gauge.convexified)


@dataclass
class HausdorffReport:
    """Strip integrals ``(1/eps) int_{eps<w<2eps} |grad w|^2`` and cover counts."""

    h: float
    levels: list = field(default_factory=list)
    values: list = field(default_factory=list)
    cover_counts: list = field(default_factory=list)
    region: tuple = ((0.0, 0.0), 0.5)

    @property
    def empty(self) -> bool:
        return not self.levels

    @property
    def ratios(self) -> list:
        """``value / (count eps^(n-1))``, the lower-bound structure."""
        n = len(np.atleast_1d(self.region[0]))
        return [v / (c * e ** (n - 1)) if c else float("nan")
                for v, c, e in zip(self.values, self.cover_counts, self.levels)]

    def rows(self) -> list[dict]:
        return [{"h": self.h, "eps": e, "value": v, "cover_count": c, "ratio": q}
                for e, v, c, q in zip(self.levels, self.values, self.cover_counts, self.ratios)]


def strip_integral(w: ScalarField, eps: float, center, radius: float,
                   subsamples: int = SUBSAMPLES) -> float:
    """``(1/eps) int_{{eps < w < 2 eps} cap B_radius} |grad w|^2``.

    Each cell meeting the strip is subsampled ``subsamples^dim`` times with
    the multilinear interpolant of ``w`` and its exact gradient.
    """
    g = w.grid
    v = w.array2d()
    h = g.h
    c = np.asarray(center, dtype=float).reshape(-1)
    t = (np.arange(subsamples) + 0.5) / subsamples
    if g.dim == 1:
        v0, v1 = v[:-1, 0], v[1:, 0]
        hit = (np.maximum(v0, v1) > eps) & (np.minimum(v0, v1) < 2 * eps)
        x0 = g.axes()[0][:-1][hit]
        a, b = v0[hit][:, None], v1[hit][:, None]
        val = a + (b - a) * t[None]
        gx = ((b - a) / h) * np.ones_like(t)[None]
        x = x0[:, None] + h * t[None]
        inside = np.abs(x - c[0]) <= radius
        chi = (val > eps) & (val < 2 * eps) & inside
        return float(np.sum(np.where(chi, gx * gx, 0.0)) * (h / subsamples) / eps)
    c00, c10, c01, c11 = v[:-1, :-1], v[1:, :-1], v[:-1, 1:], v[1:, 1:]
    hi = np.maximum(np.maximum(c00, c10), np.maximum(c01, c11))
    lo = np.minimum(np.minimum(c00, c10), np.minimum(c01, c11))
    hit = (hi > eps) & (lo < 2 * eps)
    ii, jj = np.nonzero(hit)
    if ii.size == 0:
        return 0.0
    ax, ay = g.axes()
    s, r = np.meshgrid(t, t, indexing="ij")
    s, r = s.reshape(-1)[None], r.reshape(-1)[None]
    q00, q10 = c00[hit][:, None], c10[hit][:, None]
    q01, q11 = c01[hit][:, None], c11[hit][:, None]
    val = q00 * (1 - s) * (1 - r) + q10 * s * (1 - r) + q01 * (1 - s) * r + q11 * s * r
    gx = ((q10 - q00) * (1 - r) + (q11 - q01) * r) / h
    gy = ((q01 - q00) * (1 - s) + (q11 - q10) * s) / h
    x = ax[ii][:, None] + h * s
    y = ay[jj][:, None] + h * r
    inside = (x - c[0]) ** 2 + (y - c[1]) ** 2 <= radius ** 2
    chi = (val > eps) & (val < 2 * eps) & inside
    area = (h / subsamples) ** 2
    return float(np.sum(np.where(chi, gx * gx + gy * gy, 0.0)) * area / eps)


def greedy_cover(points: np.ndarray, radius: float) -> int:
    """Number of balls of ``radius`` in a greedy cover (points in given order)."""
    left = np.ones(points.shape[0], dtype=bool)
    count = 0
    for k in range(points.shape[0]):
        if not left[k]:
            continue
        count += 1
        left &= np.linalg.norm(points - points[k], axis=1) > radius
    return count


def hausdorff_estimate(w: ScalarField, levels=None, center=None, radius: float = 0.5,
                       fb: FreeBoundary | None = None,
                       cover_factor: float = COVER_FACTOR) -> HausdorffReport:
    """Strip integral and cover count per level (default ``8h, 16h, 32h``).

    The region is ``B_radius(center)``. An empty free boundary gives an
    empty report.
    """
    g = w.grid
    center = np.zeros(g.dim) if center is None else np.asarray(center, dtype=float)
    levels = [k * g.h for k in HAUSDORFF_LEVELS] if levels is None else list(levels)
    rep = HausdorffReport(g.h, region=(tuple(center.tolist()), float(radius)))
    fb = _fb(w, fb)
    if fb.empty:
        return rep
    for e in levels:
        if e < MIN_LEVEL * g.h - 1e-12:
            raise ResolutionError(f"level {e:.4g} is below {MIN_LEVEL:g}h")
    inside = np.linalg.norm(fb.points - center, axis=1) <= radius
    pts = fb.points[inside]
    for e in levels:
        rep.levels.append(float(e))
        rep.values.append(strip_integral(w, e, center, radius))
        rep.cover_counts.append(greedy_cover(pts, cover_factor * e))
    return rep
