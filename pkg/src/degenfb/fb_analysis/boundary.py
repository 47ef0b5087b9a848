"""Free boundary extraction from nodal fields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fields import Grid, ScalarField
from ..io import write_points

DEFAULT_THRESH = 0.5   # in units of h
FIT_RADIUS = 3.0       # least-squares stencil radius, in units of h


@dataclass(frozen=True, eq=False)
class FreeBoundary:
    """Point cloud on ``F(w)`` with inner unit normals.

    ``points`` are the edge crossings of the level ``thresh`` moved to the
    zero level of the local linear fit along its normal; ``raw_points`` are
    the crossings themselves; ``slopes`` are the fitted ``|grad w|``.
    """

    grid: Grid
    thresh: float
    points: np.ndarray
    normals: np.ndarray
    slopes: np.ndarray
    raw_points: np.ndarray
    edges: np.ndarray  # (K, 2) flat node indices (zero side, positive side)

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def __len__(self) -> int:
        return self.points.shape[0]

    def write(self, path):
        return write_points(self.points, self.normals, path)


def _crossings(v, thresh, grid):
    pos = v > thresh
    flat = np.arange(v.size).reshape(v.shape)
    pts, edges = [], []
    axes = grid.axes()
    for a in range(grid.dim):
        sl0 = [slice(None)] * grid.dim
        sl1 = [slice(None)] * grid.dim
        sl0[a] = slice(0, -1)
        sl1[a] = slice(1, None)
        p0, p1 = pos[tuple(sl0)], pos[tuple(sl1)]
        cross = p0 != p1
        if not np.any(cross):
            continue
        i0 = flat[tuple(sl0)][cross]
        i1 = flat[tuple(sl1)][cross]
        v0, v1 = v.reshape(-1)[i0], v.reshape(-1)[i1]
        t = (thresh - v0) / (v1 - v0)
        base = np.stack([m.reshape(-1)[i0] for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        base[:, a] += t * grid.h
        pts.append(base)
        zero_side = np.where(p0[cross], i1, i0)
        pos_side = np.where(p0[cross], i0, i1)
        edges.append(np.stack([zero_side, pos_side], axis=1))
    if not pts:
        return np.zeros((0, grid.dim)), np.zeros((0, 2), dtype=np.int64)
    pts = np.concatenate(pts)
    edges = np.concatenate(edges)
    order = np.lexsort(pts.T[::-1])
    return pts[order], edges[order]


def _fit_normals(v, pts, thresh, grid):
    """Least-squares ``w ~ c + g . (x - p)`` over positive nodes within 3h."""
    h = grid.h
    dim = grid.dim
    rad = int(np.ceil(FIT_RADIUS))
    offs = np.array(np.meshgrid(*[np.arange(-rad, rad + 1)] * dim, indexing="ij")).reshape(dim, -1).T
    origin = np.asarray(grid.origin)
    base = np.floor((pts - origin) / h + 0.5).astype(np.int64)
    idx = base[:, None, :] + offs[None]
    shape = np.asarray(grid.shape)
    inside = np.all((idx >= 0) & (idx < shape), axis=2)
    idc = np.clip(idx, 0, shape - 1)
    xn = origin + idc * h
    vals = v[tuple(idc[..., a] for a in range(dim))]
    d = xn - pts[:, None, :]
    wgt = inside & (vals > thresh) & (np.linalg.norm(d, axis=2) <= FIT_RADIUS * h + 1e-12)
    A = np.concatenate([np.ones(d.shape[:2] + (1,)), d / h], axis=2) * wgt[..., None]
    b = vals * wgt
    ata = np.einsum("kni,knj->kij", A, A) + 1e-12 * np.eye(dim + 1)
    atb = np.einsum("kni,kn->ki", A, b)
    sol = np.linalg.solve(ata, atb[..., None])[..., 0]
    c = sol[:, 0]
    g = sol[:, 1:] / h
    return c, g


def extract_free_boundary(w: ScalarField, w_thresh: float | None = None) -> FreeBoundary:
    """Marching over cell edges at level ``w_thresh`` (default ``h/2``).

    Normals come from a least-squares linear fit of ``w`` on positive nodes
    within three cells; each crossing is then moved along the normal to the
    zero of that fit. An everywhere-positive or identically zero field
    gives an empty result.
    """
    g = w.grid
    thresh = DEFAULT_THRESH * g.h if w_thresh is None else float(w_thresh)
    w.require_nonnegative("w", tol=1e-14)
    v = w.values
    raw, edges = _crossings(v, thresh, g)
    if raw.shape[0] == 0:
        z = np.zeros((0, g.dim))
        return FreeBoundary(g, thresh, z, z.copy(), np.zeros(0), z.copy(), edges)
    c, grad = _fit_normals(v, raw, thresh, g)
    slope = np.linalg.norm(grad, axis=1)
    ok = slope > 1e-12
    # fall back to the edge direction when the fit degenerates
    fallback = np.zeros_like(raw)
    pts_nodes = g.points().reshape(-1, g.dim)
    e = pts_nodes[edges[:, 1]] - pts_nodes[edges[:, 0]]
    fallback = e / np.linalg.norm(e, axis=1, keepdims=True)
    nu = np.where(ok[:, None], grad / np.where(ok, slope, 1.0)[:, None], fallback)
    shift = np.where(ok, c / np.where(ok, slope, 1.0), 0.0)
    shift = np.clip(shift, 0.0, g.h)
    pts = raw - shift[:, None] * nu
    return FreeBoundary(g, thresh, pts, nu, slope, raw, edges)
