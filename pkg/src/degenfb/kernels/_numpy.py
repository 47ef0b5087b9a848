"""Vectorised numpy twins of :mod:`degenfb.kernels._numba`.

Red-black sweeps update one colour at a time; within a colour every node
depends only on nodes of the other colour, so the vectorised update visits
the same states as the sequential loop.
"""
import math

import numpy as np

TWO_PI = 2.0 * math.pi
OFF_I = np.array([0, 1, -1, 0, 0, 1, -1, 1, -1], dtype=np.int64)
OFF_J = np.array([0, 0, 0, 1, -1, 1, 1, -1, -1], dtype=np.int64)


def _periodic_interp(theta, tab):
    m = tab.shape[0]
    t = np.mod(theta, TWO_PI) / (TWO_PI / m)
    j = np.floor(t).astype(np.int64)
    frac = t - j
    j = j % m
    return tab[j] * (1.0 - frac) + tab[(j + 1) % m] * frac


def _uniform_interp(x, x0, dx, vals):
    k = vals.shape[0]
    t = (x - x0) / dx
    tc = np.clip(t, 0.0, k - 1)
    j = np.minimum(np.floor(tc).astype(np.int64), k - 2)
    frac = tc - j
    out = vals[j] * (1.0 - frac) + vals[j + 1] * frac
    out = np.where(t <= 0.0, vals[0], out)
    return np.where(t >= k - 1, vals[k - 1], out)


def h_eval(px, py, one_d, kind, coef, ftab, d0, dd, gvals, clamp):
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    r = np.sqrt(px * px + py * py)
    big = r > clamp
    if np.any(big):
        s = np.where(big, clamp / np.where(big, r, 1.0), 1.0)
        px = np.where(big, px * s, px)
        py = np.where(big, py * s, py)
        r = np.where(big, clamp, r)
    if kind == 0:
        return coef[0] - coef[1] * (r * r)
    if one_d:
        f = np.where(px >= 0.0, ftab[0], ftab[1])
    else:
        f = _periodic_interp(np.arctan2(py, px), ftab)
    return _uniform_interp(1.0 - r / f, d0, dd, gvals)


def grad1(wm, wc, wp, h, blend):
    one = np.where(wp >= wm, (wp - wc) / h, (wc - wm) / h)
    lo = np.minimum(wm, wp)
    if blend > 0.0:
        lam = np.clip(lo / blend, 0.0, 1.0)
    else:
        lam = np.where(lo > 0.0, 1.0, 0.0)
    return lam * ((wp - wm) / (2.0 * h)) + (1.0 - lam) * one


def local_root(s, kk, hh, h2, eps_f):
    disc = s * s - 4.0 * kk * h2 * hh
    tq = (s + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * kk)
    quad_ok = (disc >= 0.0) & (tq >= eps_f)
    tl = (s - h2 * hh / eps_f) / kk
    lin_ok = (tl > 0.0) & (tl < eps_f)
    return np.where(quad_ok, tq, np.where(lin_ok, tl, 0.0))


def _ap_g(t, m, kk, h2, gamma):
    return kk * (t - m) + h2 * gamma * t ** (gamma - 1.0)


def _ap_dg(t, kk, h2, gamma):
    return kk + h2 * gamma * (gamma - 1.0) * t ** (gamma - 2.0)


def _ap_bracket_root(lo, hi, m, kk, h2, gamma, iters, hint):
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    m = np.broadcast_to(np.asarray(m, dtype=float), lo.shape)
    hint = np.broadcast_to(np.asarray(hint, dtype=float), lo.shape)
    t = np.where((hint > lo) & (hint < hi), hint, 0.5 * (lo + hi))
    active = np.ones(t.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(iters):
            if not np.any(active):
                break
            ta, la, ha, ma = t[active], lo[active], hi[active], m[active]
            g = _ap_g(ta, ma, kk, h2, gamma)
            neg = g < 0.0
            la = np.where(neg, ta, la)
            ha = np.where(neg, ha, ta)
            dg = _ap_dg(ta, kk, h2, gamma)
            pos = dg > 0.0
            step = g / np.where(pos, dg, 1.0)
            done = pos & (np.abs(step) <= 4e-16 * ta)
            mid = 0.5 * (la + ha)
            tn = np.where(pos, ta - step, mid)
            tn = np.where(done | ((tn > la) & (tn < ha)), tn, mid)
            t[active], lo[active], hi[active] = tn, la, ha
            idx = np.flatnonzero(active)
            active[idx[done]] = False
    return t


def ap_energy(t, m, kk, h2, gamma):
    tp = np.where(t > 0.0, t, 1.0)
    w = np.where(t > 0.0, tp ** gamma, 0.0)
    return 0.5 * kk * (t - m) * (t - m) + h2 * w


def ap_argmin(m, kk, h2, gamma, iters, hint):
    m = np.asarray(m, dtype=float)
    hint = np.broadcast_to(np.asarray(hint, dtype=float), m.shape)
    if gamma == 1.0:
        t = m - h2 / kk
        return np.where(t > 0.0, t, 0.0)
    out = np.zeros_like(m)
    pos = m > 0.0
    if not np.any(pos):
        return out
    mp = m[pos]
    if gamma > 1.0:
        out[pos] = _ap_bracket_root(np.zeros_like(mp), mp, mp, kk, h2, gamma, iters,
                                    hint[pos])
        return out
    tc = (h2 * gamma * (1.0 - gamma) / kk) ** (1.0 / (2.0 - gamma))
    ok = tc < mp
    ok &= _ap_g(tc, mp, kk, h2, gamma) < 0.0
    res = np.zeros_like(mp)
    if np.any(ok):
        mo = mp[ok]
        t = _ap_bracket_root(np.full_like(mo, tc), mo, mo, kk, h2, gamma, iters,
                             hint[pos][ok])
        better = ap_energy(t, mo, kk, h2, gamma) < ap_energy(0.0, mo, kk, h2, gamma)
        res[ok] = np.where(better, t, 0.0)
    out[pos] = res
    return out


# ----------------------------------------------------------------------------
# red-black sweeps
# ----------------------------------------------------------------------------

def _layout(shape, fixed):
    nx, ny = shape
    one_d = ny == 1
    inner = np.zeros(shape, dtype=bool)
    if one_d:
        inner[1:-1, :] = True
    else:
        inner[1:-1, 1:-1] = True
    free = inner & ~fixed
    ii, jj = np.indices(shape)
    parity = (ii + jj) % 2
    return one_d, (free & (parity == 0), free & (parity == 1))


def _shift(a, di, dj):
    """``out[i, j] = a[i + di, j + dj]`` with edge replication."""
    nx, ny = a.shape
    ii = np.clip(np.arange(nx) + di, 0, nx - 1)
    jj = np.clip(np.arange(ny) + dj, 0, ny - 1)
    return a[np.ix_(ii, jj)]


def obstacle_sweep(u, fixed, rhs, h, omega):
    one_d, colors = _layout(u.shape, fixed)
    kk = 2.0 if one_d else 4.0
    h2 = h * h
    change = 0.0
    for upd in colors:
        s = _shift(u, -1, 0) + _shift(u, 1, 0)
        if not one_d:
            s = s + _shift(u, 0, -1) + _shift(u, 0, 1)
        gs = (s - h2 * rhs) / kk
        new = u + omega * (gs - u)
        new = np.where(new < 0.0, 0.0, new)
        if np.any(upd):
            change = max(change, float(np.max(np.abs(new - u)[upd])))
        u[upd] = new[upd]
    return change


def alt_phillips_sweep(u, fixed, h, gamma, omega, iters):
    one_d, colors = _layout(u.shape, fixed)
    kk = 2.0 if one_d else 4.0
    h2 = h * h
    change = 0.0
    for upd in colors:
        if not np.any(upd):
            continue
        s = _shift(u, -1, 0) + _shift(u, 1, 0)
        if not one_d:
            s = s + _shift(u, 0, -1) + _shift(u, 0, 1)
        m = (s / kk)[upd]
        old = u[upd]
        tstar = ap_argmin(m, kk, h2, gamma, iters, old)
        new = old + omega * (tstar - old)
        new = np.where(new < 0.0, 0.0, new)
        worse = ap_energy(new, m, kk, h2, gamma) > ap_energy(old, m, kk, h2, gamma)
        new = np.where(worse, tstar, new)
        change = max(change, float(np.max(np.abs(new - old))))
        u[upd] = new
    return change


def degenerate_sweep(w, fixed, h, eps_f, theta, omega, band, blend, snap,
                     kind, coef, ftab, d0, dd, gvals, clamp):
    one_d, colors = _layout(w.shape, fixed)
    kk = 2.0 if one_d else 4.0
    h2 = h * h
    change = 0.0
    for upd in colors:
        if not np.any(upd):
            continue
        wc = w[upd]
        ww = _shift(w, -1, 0)[upd]
        we = _shift(w, 1, 0)[upd]
        px = grad1(ww, wc, we, h, blend)
        s = ww + we
        low = np.minimum(ww, we)
        if one_d:
            py = np.zeros_like(px)
        else:
            ws = _shift(w, 0, -1)[upd]
            wn = _shift(w, 0, 1)[upd]
            py = grad1(ws, wc, wn, h, blend)
            s = s + ws + wn
            low = np.minimum(low, np.minimum(ws, wn))
        hh = h_eval(px, py, one_d, kind, coef, ftab, d0, dd, gvals, clamp)
        t = local_root(s, kk, hh, h2, eps_f)
        rel = np.where((wc > band) & (low > band), omega, theta)
        new = wc + rel * (t - wc)
        new = np.where(new < snap, 0.0, new)
        change = max(change, float(np.max(np.abs(new - wc))))
        w[upd] = new
    return change


def stencil9_sweep(phi, fixed, coef, rhs, omega):
    nx, ny = phi.shape
    ii, jj = np.indices(phi.shape)
    change = 0.0
    for ci in range(2):
        for cj in range(2):
            upd = (ii % 2 == ci) & (jj % 2 == cj) & ~fixed
            if not np.any(upd):
                continue
            r = rhs[upd].copy()
            for k in range(1, 9):
                c = coef[k][upd]
                nb = _shift(phi, OFF_I[k], OFF_J[k])[upd]
                r = np.where(c != 0.0, r - c * nb, r)
            gs = r / coef[0][upd]
            old = phi[upd]
            new = old + omega * (gs - old)
            change = max(change, float(np.max(np.abs(new - old))))
            phi[upd] = new
    return change


# ----------------------------------------------------------------------------
# brute-force pairwise kernels
# ----------------------------------------------------------------------------

def _chunks(n, size):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def inf_convolution(vals, pts, weight, expo):
    n = pts.shape[0]
    out = np.empty(n)
    for sl in _chunks(n, max(1, 2_000_000 // max(n, 1))):
        d2 = np.zeros((sl.stop - sl.start, n))
        for a in range(pts.shape[1]):
            diff = pts[sl, a][:, None] - pts[None, :, a]
            d2 += diff * diff
        out[sl] = np.min(vals[None, :] + weight * np.sqrt(d2) ** expo, axis=1)
    return out


def min_distances(pts, targets):
    n = pts.shape[0]
    out = np.empty(n)
    if targets.shape[0] == 0:
        out[:] = np.inf
        return out
    for sl in _chunks(n, max(1, 2_000_000 // max(targets.shape[0], 1))):
        d2 = np.zeros((sl.stop - sl.start, targets.shape[0]))
        for a in range(pts.shape[1]):
            diff = pts[sl, a][:, None] - targets[None, :, a]
            d2 += diff * diff
        out[sl] = np.sqrt(np.min(d2, axis=1))
    return out
