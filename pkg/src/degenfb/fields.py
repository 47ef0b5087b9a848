"""Uniform node-centred grids, scalar fields and finite-difference operators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

MIN_CELLS = 8


class GridError(ValueError):
    """Invalid grid, field or out-of-domain query."""


class ResolutionError(GridError):
    """A requested scale is below what the grid resolves."""


@dataclass(frozen=True)
class Grid:
    """Node-centred uniform grid with spacing ``h`` and ``n_cells`` per axis.

    Node ``k`` on axis ``a`` sits at ``origin[a] + k h``; arrays use ``'ij'``
    indexing so axis 0 is ``x_1``.
    """

    origin: tuple
    h: float
    n_cells: tuple

    def __post_init__(self):
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        n_cells = tuple(int(n) for n in np.atleast_1d(self.n_cells))
        if len(origin) not in (1, 2) or len(origin) != len(n_cells):
            raise GridError("origin and n_cells must both have length 1 or 2")
        if not (math.isfinite(self.h) and self.h > 0):
            raise GridError("h must be positive")
        if min(n_cells) < MIN_CELLS:
            raise GridError(f"need at least {MIN_CELLS} cells per axis, got {n_cells}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "n_cells", n_cells)
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def box(cls, half_width: float, n_cells: int, dim: int = 2, center=None) -> "Grid":
        """Square grid ``center + [-half_width, half_width]^dim``."""
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        h = 2.0 * half_width / n_cells
        return cls(tuple(c - half_width), h, (n_cells,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n_cells)

    @property
    def shape(self) -> tuple:
        return tuple(n + 1 for n in self.n_cells)

    @property
    def upper(self) -> tuple:
        return tuple(o + n * self.h for o, n in zip(self.origin, self.n_cells))

    def axes(self) -> list[np.ndarray]:
        return [o + self.h * np.arange(n + 1) for o, n in zip(self.origin, self.n_cells)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, dim)``."""
        return np.stack(self.mesh(), axis=-1)

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray(self.origin) - tol
        hi = np.asarray(self.upper) + tol
        return bool(np.all((x >= lo) & (x <= hi)))

    def box_edge_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0] = m[-1] = True
        if self.dim == 2:
            m[:, 0] = m[:, -1] = True
        return m

    def ball_mask(self, radius: float = 1.0, center=None) -> np.ndarray:
        """Nodes with ``|x - center| >= radius`` plus the box edges."""
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        r = np.linalg.norm(self.points() - c, axis=-1)
        return (r >= radius - 1e-12) | self.box_edge_mask()

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "h": self.h, "n_cells": list(self.n_cells)}


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on a :class:`Grid` with a Dirichlet ``boundary_mask``.

    The arrays are copied and made read-only, so a field is a value object.
    """

    grid: Grid
    values: np.ndarray
    boundary_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise GridError("field values must be finite")
        mask = (self.grid.box_edge_mask() if self.boundary_mask is None
                else np.array(self.boundary_mask, dtype=bool).reshape(self.grid.shape))
        v.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "boundary_mask", mask)

    @classmethod
    def from_function(cls, grid: Grid, func, boundary_mask=None) -> "ScalarField":
        """Evaluate ``func(points)`` with points of shape ``(..., dim)``."""
        return cls(grid, np.asarray(func(grid.points()), dtype=float), boundary_mask)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.boundary_mask)

    def array2d(self) -> np.ndarray:
        """Writable 2D copy (1D fields become shape ``(n, 1)``)."""
        v = np.array(self.values, dtype=float)
        return v.reshape(v.shape[0], 1) if v.ndim == 1 else v

    def mask2d(self) -> np.ndarray:
        m = np.array(self.boundary_mask)
        return m.reshape(m.shape[0], 1) if m.ndim == 1 else m

    def require_nonnegative(self, what: str = "field", tol: float = 0.0) -> None:
        if self.values.min() < -tol:
            raise GridError(f"{what} must be nonnegative (min {self.values.min():.3g})")

    def interpolator(self):
        return RegularGridInterpolator(self.grid.axes(), self.values, method="linear",
                                       bounds_error=True)

    def __call__(self, x) -> np.ndarray:
        """Multilinear interpolation at points ``x`` of shape ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        if not self.grid.contains(x.reshape(-1, self.grid.dim)):
            raise GridError("interpolation point outside the grid")
        lo = np.asarray(self.grid.origin)
        hi = np.asarray(self.grid.upper)
        return self.interpolator()(np.clip(x, lo, hi))


# ----------------------------------------------------------------------------
# finite differences
# ----------------------------------------------------------------------------

def _pad_shift(a, axis, step):
    """``a[k + step]`` along ``axis`` with edge replication."""
    idx = np.clip(np.arange(a.shape[axis]) + step, 0, a.shape[axis] - 1)
    return np.take(a, idx, axis=axis)


def interior_mask(grid: Grid) -> np.ndarray:
    return ~grid.box_edge_mask()


def laplacian(f: ScalarField) -> ScalarField:
    """Standard ``(2 dim + 1)``-point Laplacian; zero on the box edges."""
    v = f.values
    h2 = f.grid.h ** 2
    lap = np.zeros_like(v)
    inner = interior_mask(f.grid)
    acc = np.zeros_like(v)
    for a in range(f.grid.dim):
        acc = acc + _pad_shift(v, a, -1) + _pad_shift(v, a, 1)
    lap[inner] = ((acc - 2.0 * f.grid.dim * v) / h2)[inner]
    return ScalarField(f.grid, lap, f.grid.box_edge_mask())


def gradient(f: ScalarField, scheme: str = "centered", mask=None,
             blend: float = 0.0) -> np.ndarray:
    """Nodal gradient, shape ``(*shape, dim)``.

    ``scheme='centered'`` uses centred differences in the interior.
    ``scheme='one_sided'`` is centred where both neighbours along an axis lie
    in ``mask`` (default ``values > 0``) and one-sided towards the positive
    (else the larger) neighbour otherwise. ``blend > 0``, a length in the
    units of the values, replaces the sharp switch by the continuous weight
    ``clip(min(neighbours)/blend, 0, 1)`` used by the solvers. Box-edge nodes
    always use one-sided differences pointing inwards.
    """
    if scheme not in ("centered", "one_sided"):
        raise ValueError(f"unknown gradient scheme {scheme!r}")
    v = f.values
    h = f.grid.h
    out = np.zeros(v.shape + (f.grid.dim,))
    if mask is None:
        mask = v > 0.0
    for a in range(f.grid.dim):
        wm, wp = _pad_shift(v, a, -1), _pad_shift(v, a, 1)
        centred = (wp - wm) / (2.0 * h)
        if scheme == "centered":
            out[..., a] = centred
        else:
            fwd, bwd = (wp - v) / h, (v - wm) / h
            mm, mp = _pad_shift(mask, a, -1), _pad_shift(mask, a, 1)
            if blend > 0.0:
                lam = np.clip(np.minimum(wm, wp) / blend, 0.0, 1.0)
                one = np.where(wp >= wm, fwd, bwd)
            else:
                lam = (mm & mp).astype(float)
                one = np.where(mp & ~mm, fwd, np.where(mm & ~mp, bwd,
                                                       np.where(wp >= wm, fwd, bwd)))
            out[..., a] = lam * centred + (1.0 - lam) * one
        _fix_edges(out, v, a, h)
    return out


def _fix_edges(out, v, a, h):
    n = v.shape[a]
    first = [slice(None)] * v.ndim
    last = [slice(None)] * v.ndim
    first[a], last[a] = 0, n - 1
    nxt = list(first)
    prv = list(last)
    nxt[a], prv[a] = 1, n - 2
    out[tuple(first) + (a,)] = (v[tuple(nxt)] - v[tuple(first)]) / h
    out[tuple(last) + (a,)] = (v[tuple(last)] - v[tuple(prv)]) / h


# ----------------------------------------------------------------------------
# rescaling and local statistics
# ----------------------------------------------------------------------------

def rescale_lipschitz(f: ScalarField, r: float, center=None,
                      target: Grid | None = None) -> ScalarField:
    """``x -> f(center + r x) / r`` sampled on ``target`` (default ``f.grid``).

    Raises :class:`GridError` when the rescaled window leaves the source grid.
    """
    if r <= 0:
        raise GridError("scale r must be positive")
    target = target or f.grid
    c = np.zeros(f.grid.dim) if center is None else np.asarray(center, dtype=float)
    x = c + r * target.points()
    if not f.grid.contains(x.reshape(-1, f.grid.dim)):
        raise GridError("rescaled window exits the source grid")
    return ScalarField(target, f(x) / r, target.box_edge_mask())


def _ball_nodes(f: ScalarField, center, r):
    c = np.asarray(center, dtype=float).reshape(-1)
    d = np.linalg.norm(f.grid.points() - c, axis=-1)
    return d <= r + 1e-12


def _require_ball_inside(grid: Grid, center, r):
    c = np.asarray(center, dtype=float).reshape(-1)
    if np.any(c - r < np.asarray(grid.origin) - 1e-12) or np.any(
            c + r > np.asarray(grid.upper) + 1e-12):
        raise GridError(f"ball of radius {r} at {c.tolist()} is not inside the grid")


def oscillation(f: ScalarField, center, r: float) -> float:
    """``sup - inf`` over nodes of the closed ball ``B_r(center)``."""
    _require_ball_inside(f.grid, center, r)
    sel = _ball_nodes(f, center, r)
    vals = f.values[sel]
    return float(vals.max() - vals.min())


def sphere_samples(grid: Grid, center, r: float, samples: int | None = None):
    c = np.asarray(center, dtype=float).reshape(-1)
    if grid.dim == 1:
        return np.array([[c[0] - r], [c[0] + r]])
    # a multiple of 8 so the axis and diagonal directions are sampled exactly
    m = samples or 8 * max(8, int(math.ceil(2.0 * math.pi * r / grid.h)))
    t = 2.0 * np.pi * np.arange(m) / m
    return c + r * np.stack([np.cos(t), np.sin(t)], axis=1)


def sup_on_sphere(f: ScalarField, center, r: float, samples: int | None = None) -> float:
    """Maximum of the multilinear interpolant on the sphere ``|x - c| = r``."""
    _require_ball_inside(f.grid, center, r)
    return float(np.max(f(sphere_samples(f.grid, center, r, samples))))
