"""Numba implementations of the hot loops.

Every function here has a twin in :mod:`degenfb.kernels._numpy` that performs
the same floating point operations in the same order. Arrays are always
two-dimensional; a one-dimensional problem is stored with shape ``(n, 1)``
and the second axis is then ignored by the stencils.

``fastmath`` is deliberately off so that results are reproducible and agree
with the numpy path.
"""
import math

import numba as nb
import numpy as np

_opts = {"nogil": True, "cache": True}

TWO_PI = 2.0 * math.pi

# nine-point stencil offsets: centre, E, W, N, S, NE, NW, SE, SW
OFF_I = np.array([0, 1, -1, 0, 0, 1, -1, 1, -1], dtype=np.int64)
OFF_J = np.array([0, 0, 0, 1, -1, 1, 1, -1, -1], dtype=np.int64)


# ----------------------------------------------------------------------------
# scalar helpers
# ----------------------------------------------------------------------------

@nb.njit(**_opts)
def _periodic_interp(theta, tab):
    m = tab.shape[0]
    t = (theta % TWO_PI) / (TWO_PI / m)
    j = int(math.floor(t))
    frac = t - j
    j = j % m
    return tab[j] * (1.0 - frac) + tab[(j + 1) % m] * frac


@nb.njit(**_opts)
def _uniform_interp(x, x0, dx, vals):
    k = vals.shape[0]
    t = (x - x0) / dx
    if t <= 0.0:
        return vals[0]
    if t >= k - 1:
        return vals[k - 1]
    j = int(math.floor(t))
    frac = t - j
    return vals[j] * (1.0 - frac) + vals[j + 1] * frac


@nb.njit(**_opts)
def h_eval(px, py, one_d, kind, coef, ftab, d0, dd, gvals, clamp):
    """Evaluate the right-hand side h at the gradient ``(px, py)``."""
    r = math.sqrt(px * px + py * py)
    if r > clamp:
        s = clamp / r
        px = px * s
        py = py * s
        r = clamp
    if kind == 0:
        return coef[0] - coef[1] * (r * r)
    if one_d:
        f = ftab[0] if px >= 0.0 else ftab[1]
    else:
        f = _periodic_interp(math.atan2(py, px), ftab)
    return _uniform_interp(1.0 - r / f, d0, dd, gvals)


@nb.njit(**_opts)
def grad1(wm, wc, wp, h, blend):
    """Directional derivative with a continuous centred/one-sided blend.

    Centred when both neighbours are (well) positive, one-sided towards the
    larger neighbour otherwise. ``blend > 0`` interpolates between the two
    on the scale ``blend``; ``blend == 0`` gives the sharp switch.
    """
    if wp >= wm:
        one = (wp - wc) / h
    else:
        one = (wc - wm) / h
    lo = min(wm, wp)
    if blend > 0.0:
        lam = lo / blend
        if lam < 0.0:
            lam = 0.0
        elif lam > 1.0:
            lam = 1.0
    else:
        lam = 1.0 if lo > 0.0 else 0.0
    return lam * ((wp - wm) / (2.0 * h)) + (1.0 - lam) * one


@nb.njit(**_opts)
def local_root(s, kk, hh, h2, eps_f):
    """Largest ``t >= 0`` with ``s - kk*t = h2*hh/max(t, eps_f)``, else 0."""
    disc = s * s - 4.0 * kk * h2 * hh
    if disc >= 0.0:
        t = (s + math.sqrt(disc)) / (2.0 * kk)
        if t >= eps_f:
            return t
    t = (s - h2 * hh / eps_f) / kk
    if t > 0.0 and t < eps_f:
        return t
    return 0.0


@nb.njit(**_opts)
def _ap_g(t, m, kk, h2, gamma):
    return kk * (t - m) + h2 * gamma * t ** (gamma - 1.0)


@nb.njit(**_opts)
def _ap_dg(t, kk, h2, gamma):
    return kk + h2 * gamma * (gamma - 1.0) * t ** (gamma - 2.0)


@nb.njit(**_opts)
def _ap_bracket_root(lo, hi, m, kk, h2, gamma, iters, hint):
    # safeguarded Newton; g(lo) < 0 < g(hi). Stops once the Newton step is
    # below round-off (the numpy twin freezes converged entries the same way).
    # ``hint`` (the current nodal value) is used as a warm start.
    t = hint if (hint > lo and hint < hi) else 0.5 * (lo + hi)
    for _ in range(iters):
        g = _ap_g(t, m, kk, h2, gamma)
        if g < 0.0:
            lo = t
        else:
            hi = t
        dg = _ap_dg(t, kk, h2, gamma)
        if dg > 0.0:
            step = g / dg
            if abs(step) <= 4e-16 * t:
                return t - step
            tn = t - step
        else:
            tn = 0.5 * (lo + hi)
        if not (tn > lo and tn < hi):
            tn = 0.5 * (lo + hi)
        t = tn
    return t


@nb.njit(**_opts)
def ap_energy(t, m, kk, h2, gamma):
    w = t ** gamma if t > 0.0 else 0.0
    return 0.5 * kk * (t - m) * (t - m) + h2 * w


@nb.njit(**_opts)
def ap_argmin(m, kk, h2, gamma, iters, hint):
    """Global minimiser over ``t >= 0`` of ``kk/2 (t-m)^2 + h2 t^gamma``."""
    if gamma == 1.0:
        t = m - h2 / kk
        return t if t > 0.0 else 0.0
    if m <= 0.0:
        return 0.0
    if gamma > 1.0:
        return _ap_bracket_root(0.0, m, m, kk, h2, gamma, iters, hint)
    tc = (h2 * gamma * (1.0 - gamma) / kk) ** (1.0 / (2.0 - gamma))
    if tc >= m:
        return 0.0
    if _ap_g(tc, m, kk, h2, gamma) >= 0.0:
        return 0.0
    t = _ap_bracket_root(tc, m, m, kk, h2, gamma, iters, hint)
    if ap_energy(t, m, kk, h2, gamma) < ap_energy(0.0, m, kk, h2, gamma):
        return t
    return 0.0


# ----------------------------------------------------------------------------
# red-black sweeps
# ----------------------------------------------------------------------------

@nb.njit(**_opts)
def obstacle_sweep(u, fixed, rhs, h, omega):
    """Projected SOR sweep for ``Delta u = rhs`` on ``{u > 0}``, ``u >= 0``."""
    nx, ny = u.shape
    one_d = ny == 1
    kk = 2.0 if one_d else 4.0
    jlo, jhi = (0, 1) if one_d else (1, ny - 1)
    h2 = h * h
    change = 0.0
    for color in range(2):
        for i in range(1, nx - 1):
            for j in range(jlo, jhi):
                if (i + j) % 2 != color or fixed[i, j]:
                    continue
                s = u[i - 1, j] + u[i + 1, j]
                if not one_d:
                    s = s + u[i, j - 1] + u[i, j + 1]
                gs = (s - h2 * rhs[i, j]) / kk
                old = u[i, j]
                new = old + omega * (gs - old)
                if new < 0.0:
                    new = 0.0
                d = abs(new - old)
                if d > change:
                    change = d
                u[i, j] = new
    return change


@nb.njit(**_opts)
def alt_phillips_sweep(u, fixed, h, gamma, omega, iters):
    """Coordinate-descent sweep with over-relaxation and energy safeguard."""
    nx, ny = u.shape
    one_d = ny == 1
    kk = 2.0 if one_d else 4.0
    jlo, jhi = (0, 1) if one_d else (1, ny - 1)
    h2 = h * h
    change = 0.0
    for color in range(2):
        for i in range(1, nx - 1):
            for j in range(jlo, jhi):
                if (i + j) % 2 != color or fixed[i, j]:
                    continue
                s = u[i - 1, j] + u[i + 1, j]
                if not one_d:
                    s = s + u[i, j - 1] + u[i, j + 1]
                m = s / kk
                old = u[i, j]
                tstar = ap_argmin(m, kk, h2, gamma, iters, old)
                new = old + omega * (tstar - old)
                if new < 0.0:
                    new = 0.0
                if ap_energy(new, m, kk, h2, gamma) > ap_energy(old, m, kk, h2, gamma):
                    new = tstar
                d = abs(new - old)
                if d > change:
                    change = d
                u[i, j] = new
    return change


@nb.njit(**_opts)
def degenerate_sweep(w, fixed, h, eps_f, theta, omega, band, blend, snap,
                     kind, coef, ftab, d0, dd, gvals, clamp):
    """Nonlinear red-black Gauss-Seidel sweep for ``Delta w = h(grad w)/w``.

    The local problem is solved implicitly in the value at the node (the
    gradient is lagged). Nodes whose value and neighbours all exceed
    ``band`` are over-relaxed with ``omega``; all others are damped with
    ``theta``. Values below ``snap`` are set to zero.
    """
    nx, ny = w.shape
    one_d = ny == 1
    kk = 2.0 if one_d else 4.0
    jlo, jhi = (0, 1) if one_d else (1, ny - 1)
    h2 = h * h
    change = 0.0
    for color in range(2):
        for i in range(1, nx - 1):
            for j in range(jlo, jhi):
                if (i + j) % 2 != color or fixed[i, j]:
                    continue
                wc = w[i, j]
                we = w[i + 1, j]
                ww = w[i - 1, j]
                px = grad1(ww, wc, we, h, blend)
                s = ww + we
                low = min(ww, we)
                if one_d:
                    py = 0.0
                else:
                    wn = w[i, j + 1]
                    ws = w[i, j - 1]
                    py = grad1(ws, wc, wn, h, blend)
                    s = s + ws + wn
                    low = min(low, min(ws, wn))
                hh = h_eval(px, py, one_d, kind, coef, ftab, d0, dd, gvals, clamp)
                t = local_root(s, kk, hh, h2, eps_f)
                rel = omega if (wc > band and low > band) else theta
                new = wc + rel * (t - wc)
                if new < snap:
                    new = 0.0
                d = abs(new - wc)
                if d > change:
                    change = d
                w[i, j] = new
    return change


@nb.njit(**_opts)
def stencil9_sweep(phi, fixed, coef, rhs, omega):
    """Four-colour SOR sweep for a nine-point stencil.

    ``coef[k]`` holds the weight of the neighbour at offset ``OFFSETS[k]``;
    ``coef[0]`` is the diagonal. Zero weights are skipped, so neighbours that
    fall outside the array must carry zero weight.
    """
    nx, ny = phi.shape
    change = 0.0
    for ci in range(2):
        for cj in range(2):
            for i in range(ci, nx, 2):
                for j in range(cj, ny, 2):
                    if fixed[i, j]:
                        continue
                    r = rhs[i, j]
                    for k in range(1, 9):
                        c = coef[k, i, j]
                        if c != 0.0:
                            r = r - c * phi[i + OFF_I[k], j + OFF_J[k]]
                    gs = r / coef[0, i, j]
                    old = phi[i, j]
                    new = old + omega * (gs - old)
                    d = abs(new - old)
                    if d > change:
                        change = d
                    phi[i, j] = new
    return change


# ----------------------------------------------------------------------------
# brute-force pairwise kernels
# ----------------------------------------------------------------------------

@nb.njit(**_opts)
def inf_convolution(vals, pts, weight, expo):
    """``out[i] = min_j vals[j] + weight * |pts[i] - pts[j]|**expo``."""
    n, dim = pts.shape
    out = np.empty(n)
    for i in range(n):
        best = vals[i]
        for j in range(n):
            if vals[j] >= best:   # the cone term is nonnegative
                continue
            d2 = 0.0
            for a in range(dim):
                diff = pts[i, a] - pts[j, a]
                d2 += diff * diff
            v = vals[j] + weight * math.sqrt(d2) ** expo
            if v < best:
                best = v
        out[i] = best
    return out


@nb.njit(**_opts)
def min_distances(pts, targets):
    """Euclidean distance from each row of ``pts`` to the set ``targets``."""
    n, dim = pts.shape
    m = targets.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(m):
            d2 = 0.0
            for a in range(dim):
                diff = pts[i, a] - targets[j, a]
                d2 += diff * diff
            if d2 < best:
                best = d2
        out[i] = math.sqrt(best)
    return out
