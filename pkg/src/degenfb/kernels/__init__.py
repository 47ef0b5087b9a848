"""Dispatch layer for the hot kernels.

Each public function forwards to the numba or numpy implementation chosen by
:func:`degenfb._backend.backend_name` at call time.
"""
from __future__ import annotations

import numpy as np

from .. import _backend
from . import _numpy

if _backend.HAVE_NUMBA:
    from . import _numba
else:  # pragma: no cover
    _numba = None

__all__ = [
    "obstacle_sweep",
    "alt_phillips_sweep",
    "degenerate_sweep",
    "stencil9_sweep",
    "inf_convolution",
    "min_distances",
    "OFF_I",
    "OFF_J",
    "impl",
]

OFF_I = _numpy.OFF_I
OFF_J = _numpy.OFF_J

# fixed Newton iteration count for the Alt-Phillips local problem
AP_NEWTON_ITERS = 48


def impl(name: str | None = None):
    """Module holding the kernels for backend ``name`` (default: current)."""
    name = name or _backend.backend_name()
    if name == "numba":
        if _numba is None:
            raise RuntimeError("numba backend requested but numba is missing")
        return _numba
    return _numpy


def obstacle_sweep(u, fixed, rhs, h, omega):
    """One projected SOR sweep in place; returns the largest nodal change."""
    return float(impl().obstacle_sweep(u, fixed, rhs, float(h), float(omega)))


def alt_phillips_sweep(u, fixed, h, gamma, omega):
    """One safeguarded coordinate-descent sweep in place."""
    return float(impl().alt_phillips_sweep(u, fixed, float(h), float(gamma),
                                           float(omega), AP_NEWTON_ITERS))


def degenerate_sweep(w, fixed, h, eps_f, theta, omega, band, blend, snap, hargs):
    """One nonlinear red-black sweep in place; ``hargs`` from ``HFunction``."""
    return float(impl().degenerate_sweep(w, fixed, float(h), float(eps_f),
                                         float(theta), float(omega), float(band),
                                         float(blend), float(snap), *hargs))


def stencil9_sweep(phi, fixed, coef, rhs, omega):
    """One four-colour SOR sweep of a nine-point stencil in place."""
    return float(impl().stencil9_sweep(phi, fixed, coef, rhs, float(omega)))


def inf_convolution(vals, pts, weight, expo):
    vals = np.ascontiguousarray(vals, dtype=float)
    pts = np.ascontiguousarray(pts, dtype=float)
    return impl().inf_convolution(vals, pts, float(weight), float(expo))


def min_distances(pts, targets):
    pts = np.ascontiguousarray(pts, dtype=float)
    targets = np.ascontiguousarray(targets, dtype=float).reshape(-1, pts.shape[1])
    return impl().min_distances(pts, targets)
