"""The degenerate Neumann-type problem ``L_s phi = sum a_ij phi_ij + s phi_n/x_n``.

Two-dimensional half-ball solves on a vertically staggered grid (rows at
``x_n = (k + 1/2) h``), the shear that straightens a slanted drift, the
explicit one-dimensional solutions and the boundary expansion fit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.sparse.linalg import spsolve

from . import kernels
from .fields import Grid, GridError, ResolutionError, ScalarField
from .geometry import check_direction
from .solvers.common import SolveReport, Timer

DEFAULT_DELTA = 0.1
FIT_WINDOW = (4.0, 0.2)    # lower end in units of h, upper end absolute
MIN_FIT_NODES = 8


class LinearizedError(ValueError):
    """Parameters outside the admissible range of the linearized problem."""


@dataclass(frozen=True, eq=False)
class LinearizedProblem:
    """``sum a_ij phi_ij + s phi_n / x_n`` on the upper half ball.

    ``a`` is symmetric with ``a_nn = 1``; ``s`` lies in ``[-1 + delta, 1/delta]``.
    When built from a drift direction ``omega`` (see :meth:`from_direction`),
    ``d`` and ``b`` hold the sheared coefficients ``omega_i omega_j/omega_n^2``
    and ``-2 omega_i/omega_n`` (``i, j < n``).
    """

    a: np.ndarray
    s: float
    delta: float = DEFAULT_DELTA
    omega: np.ndarray | None = None
    d: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise LinearizedError("a must be a square matrix")
        if not np.allclose(a, a.T, atol=1e-14):
            raise LinearizedError("a must be symmetric")
        if abs(a[-1, -1] - 1.0) > 1e-14:
            raise LinearizedError("a_nn must equal 1")
        if np.linalg.eigvalsh(a).min() <= 0.0:
            raise LinearizedError("a must be positive definite")
        if not 0.0 < self.delta <= 1.0:
            raise LinearizedError("delta must lie in (0, 1]")
        lo, hi = -1.0 + self.delta, 1.0 / self.delta
        if not lo - 1e-14 <= self.s <= hi + 1e-14:
            raise LinearizedError(f"s = {self.s} outside [-1 + delta, 1/delta] = [{lo:.4g}, {hi:.4g}]")
        object.__setattr__(self, "a", a)

    @classmethod
    def laplacian(cls, s: float, dim: int = 2, delta: float = DEFAULT_DELTA):
        return cls(np.eye(dim), float(s), delta)

    @classmethod
    def from_direction(cls, omega, s: float, delta: float = DEFAULT_DELTA):
        """Sheared form of ``Delta phi + v . grad phi / x_n`` with ``v`` parallel to ``omega``.

        ``s = v_n``. The shear ``x' -> x' + omega' x_n/omega_n`` turns the
        Laplacian into ``sum (delta_ij + d_ij) phi_ij + sum b_i phi_in + phi_nn``
        and removes the tangential drift.
        """
        omega = check_direction(omega)
        if omega[-1] < delta:
            raise LinearizedError(f"omega_n = {omega[-1]:.4g} < delta = {delta:.4g}")
        k = omega[:-1] / omega[-1]
        n = omega.size
        a = np.eye(n)
        a[:-1, :-1] += np.outer(k, k)
        a[:-1, -1] = -k
        a[-1, :-1] = -k
        return cls(a, float(s), delta, omega, np.outer(k, k), -2.0 * k)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def ellipticity(self) -> tuple[float, float]:
        ev = np.linalg.eigvalsh(self.a)
        return float(ev[0]), float(ev[-1])

    @property
    def branch(self) -> str:
        return "weighted" if self.s < 1.0 else "bounded"


# ----------------------------------------------------------------------------
# staggered half-ball grid and the discrete operator
# ----------------------------------------------------------------------------

def half_ball_grid(n: int) -> Grid:
    """Grid with ``h = 1/n``, columns ``x' = j h`` and rows ``x_n = (k + 1/2) h``."""
    if n < 8:
        raise ResolutionError("half-ball grids need n >= 8")
    h = 1.0 / n
    return Grid((-(n + 1) * h, 0.5 * h), h, (2 * n + 2, n + 1))


def half_ball_fixed(grid: Grid) -> np.ndarray:
    """Dirichlet nodes: outside the open unit ball, or on the side/top edges."""
    x = grid.points()
    fixed = np.linalg.norm(x, axis=-1) >= 1.0 - 1e-12
    fixed[0, :] = fixed[-1, :] = True
    fixed[:, -1] = True
    return fixed


def stencil(problem: LinearizedProblem, grid: Grid, closure: bool = True) -> np.ndarray:
    """Nine-point weights ``coef[k, i, j]`` (order C, E, W, N, S, NE, NW, SE, SW).

    With ``closure`` the ghost row below ``x_n = h/2`` is the even reflection
    of the first row and its weights are folded into that row.
    """
    if problem.dim != 2 or grid.dim != 2:
        raise LinearizedError("the half-ball solver is two-dimensional")
    h = grid.h
    h2 = h * h
    a11, a12 = problem.a[0, 0], problem.a[0, 1]
    s = problem.s
    xn = grid.axes()[1]
    nx, ny = grid.shape
    coef = np.zeros((9, nx, ny))
    drift = s / (2.0 * h * xn)[None, :] * np.ones((nx, 1))
    coef[0] = -2.0 * (a11 + 1.0) / h2
    coef[1] = coef[2] = a11 / h2
    coef[3] = 1.0 / h2 + drift
    coef[4] = 1.0 / h2 - drift
    cross = 2.0 * a12 / (4.0 * h2)
    coef[5] = coef[8] = cross
    coef[6] = coef[7] = -cross
    if closure:
        # phi(x', -h/2) = phi(x', h/2): S -> C, SE -> E, SW -> W
        coef[0, :, 0] += coef[4, :, 0]
        coef[1, :, 0] += coef[7, :, 0]
        coef[2, :, 0] += coef[8, :, 0]
        coef[4, :, 0] = coef[7, :, 0] = coef[8, :, 0] = 0.0
    # neighbours that would fall outside the array carry zero weight
    coef[[1, 5, 7], -1, :] = 0.0
    coef[[2, 6, 8], 0, :] = 0.0
    coef[[3, 5, 6], :, -1] = 0.0
    coef[[4, 7, 8], :, 0] = 0.0
    return coef


def apply_operator(coef: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``sum_k coef[k] phi(neighbour k)`` with edge replication outside."""
    out = coef[0] * phi
    nx, ny = phi.shape
    for k in range(1, 9):
        ii = np.clip(np.arange(nx) + kernels.impl("numpy").OFF_I[k], 0, nx - 1)
        jj = np.clip(np.arange(ny) + kernels.impl("numpy").OFF_J[k], 0, ny - 1)
        out = out + coef[k] * phi[np.ix_(ii, jj)]
    return out


def Ls_residual(problem: LinearizedProblem, phi: ScalarField, rhs=None,
                fixed: np.ndarray | None = None) -> np.ndarray:
    """Discrete ``L_s phi - rhs`` on free nodes (zero elsewhere)."""
    g = phi.grid
    fixed = half_ball_fixed(g) if fixed is None else fixed
    coef = stencil(problem, g)
    res = apply_operator(coef, phi.values) - (0.0 if rhs is None else rhs)
    return np.where(fixed, 0.0, res)


def _direct(coef, fixed, rhs, phi):
    nx, ny = phi.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    free = ~fixed
    rows, cols, vals = [], [], []
    b = np.where(free, rhs, phi).astype(float).copy()
    ii, jj = np.nonzero(free)
    off = kernels.impl("numpy")
    for k in range(9):
        c = coef[k][free]
        ni, nj = ii + off.OFF_I[k], jj + off.OFF_J[k]
        ok = (c != 0.0) & (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny)
        rows.append(idx[ii, jj][ok])
        cols.append(idx[ni[ok], nj[ok]])
        vals.append(c[ok])
    fi, fj = np.nonzero(fixed)
    rows.append(idx[fi, fj])
    cols.append(idx[fi, fj])
    vals.append(np.ones(fi.size))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nx * ny, nx * ny))
    return spsolve(A.tocsc(), b.reshape(-1)).reshape(nx, ny)


def solve_Ls(problem: LinearizedProblem, data, n: int = 64, rhs=None,
             method: str = "sor", tol: float = 1e-12, max_sweeps: int = 500_000,
             omega: float | None = None) -> tuple[ScalarField, SolveReport]:
    """Solve ``L_s phi = rhs`` in the upper half ball with ``phi = data`` on ``|x| = 1``.

    ``data`` is a callable on points ``(..., 2)`` evaluated at every node
    outside the open ball. The first row sits at ``x_n = h/2`` and the ghost
    row below it is the even reflection, which removes the ``t^(1-s)``
    component (``s < 1``) or imposes boundedness (``s >= 1``). ``method`` is
    ``'sor'`` (four-colour relaxation until the sweep change is below
    ``tol``) or ``'direct'`` (sparse LU).
    """
    if method not in ("sor", "direct"):
        raise LinearizedError(f"unknown method {method!r}")
    g = half_ball_grid(n)
    fixed = half_ball_fixed(g)
    x = g.points()
    vals = np.asarray(data(x), dtype=float) * np.ones(g.shape)
    b = np.zeros(g.shape) if rhs is None else (
        np.asarray(rhs(x), dtype=float) * np.ones(g.shape) if callable(rhs)
        else np.asarray(rhs, dtype=float) * np.ones(g.shape))
    coef = stencil(problem, g)
    phi = np.where(fixed, vals, 0.0)
    rep = SolveReport("linearized")
    rep.flags.append(f"branch_{problem.branch}")
    with Timer() as t:
        if method == "direct":
            phi = _direct(coef, fixed, b, phi)
            rep.iterations, rep.change_last = 1, 0.0
            rep.converged = True
        else:
            om = omega or 2.0 / (1.0 + math.sin(math.pi / n))
            change = np.inf
            it = 0
            for it in range(1, max_sweeps + 1):
                change = kernels.stencil9_sweep(phi, fixed, coef, b, om)
                if change <= tol:
                    break
            rep.iterations, rep.change_last = it, change
            rep.converged = bool(change <= tol)
            if not rep.converged:
                rep.flags.append("max_iters")
    rep.wall_time = t.elapsed
    out = ScalarField(g, phi, fixed)
    res = Ls_residual(problem, out, b, fixed) * g.h ** 2
    rep.residual_sup = float(np.abs(res).max())
    rep.residual_l2 = float(np.sqrt(np.sum(res ** 2) * g.h ** 2))
    rep.extra.update(s=problem.s, n=n, method=method)
    return out, rep


# ----------------------------------------------------------------------------
# shear between slanted and straight drift
# ----------------------------------------------------------------------------

def _shear(phi: ScalarField, k: float, sign: float, radius: float | None):
    g = phi.grid
    xs, xn = g.axes()
    limit = min(abs(xs[0]), abs(xs[-1]))
    safe = min(1.0, limit / math.hypot(1.0, k))
    radius = safe if radius is None else float(radius)
    region = np.linalg.norm(g.points(), axis=-1) < radius
    v = phi.values
    out = np.empty_like(v)
    lo, hi = xs[0] - 1e-12, xs[-1] + 1e-12
    for j in range(g.shape[1]):
        src = xs + sign * k * xn[j]
        if np.any(((src < lo) | (src > hi)) & region[:, j]):
            raise GridError(f"shear exits the source domain (radius {radius:.4g}, "
                            f"largest admissible {safe:.4g})")
        out[:, j] = np.interp(src, xs, v[:, j])
    return ScalarField(g, out, phi.boundary_mask | ~region)


def _shear_slope(phi: ScalarField, omega, delta: float) -> float:
    omega = check_direction(omega, phi.grid.dim)
    if omega[-1] < delta:
        raise LinearizedError(f"omega_n = {omega[-1]:.4g} < delta = {delta:.4g}")
    return float(omega[0] / omega[-1])


def domain_variation(phi: ScalarField, omega, delta: float = DEFAULT_DELTA,
                     radius: float | None = None) -> ScalarField:
    """``phi~(x', x_n) = phi(x' + omega' x_n/omega_n, x_n)`` on the same grid.

    Interpolation is linear along rows (rows are preserved by the shear), so
    affine fields are mapped exactly. Every node of the open half ball of
    ``radius`` must map into the grid; the default is the largest such
    radius (at most 1). Nodes outside that half ball hold clamped values and
    join the boundary mask.
    """
    return _shear(phi, _shear_slope(phi, omega, delta), 1.0, radius)


def inverse_domain_variation(phi_t: ScalarField, omega, delta: float = DEFAULT_DELTA,
                             radius: float | None = None) -> ScalarField:
    """Inverse of :func:`domain_variation`."""
    return _shear(phi_t, _shear_slope(phi_t, omega, delta), -1.0, radius)


def drift_residual(phi: ScalarField, v) -> np.ndarray:
    """Centred ``Delta phi + v . grad phi / x_n`` at interior nodes (no closure)."""
    g = phi.grid
    p = phi.values
    h = g.h
    out = np.zeros_like(p)
    c = p[1:-1, 1:-1]
    lap = (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * c) / h ** 2
    gx = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * h)
    gy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * h)
    xn = g.axes()[1][1:-1][None, :]
    out[1:-1, 1:-1] = lap + (v[0] * gx + v[1] * gy) / xn
    return out


# ----------------------------------------------------------------------------
# the barrier with L_s w > 0
# ----------------------------------------------------------------------------

@dataclass
class BarrierCheck:
    ok: bool
    A: float
    min_value: float
    exact: float


def standard_barrier(problem: LinearizedProblem, A: float | None = None, c: float = 1.0,
                     eps: float | None = None):
    """Barrier ``w`` with ``L_s w = 2c(A(1+s) - tr a')`` in the open half ball.

    For ``s < 1``: ``c(-|x'|^2 + A x_n^2 + x_n^(1-s)/32)`` with
    ``A > Lambda (n-1)/delta``. For ``s >= 1``: ``c(-|x'|^2 + A x_n^2 - eps x_n^(1-s))``
    (``+eps log x_n`` when ``s = 1``) with ``A > Lambda (n-1)/2``. The default
    ``A`` is 1.1 times the bound; the default ``eps`` is ``1/32`` and
    ``1e-3`` respectively. Returns ``(w, A)``.
    """
    lam_max = problem.ellipticity[1]
    s = problem.s
    weighted = s < 1.0
    need = lam_max * (problem.dim - 1) / (problem.delta if weighted else 2.0)
    A = 1.1 * need if A is None else float(A)
    if A <= need:
        bound = "Lambda (n-1)/delta" if weighted else "Lambda (n-1)/2"
        raise LinearizedError(f"barrier needs A > {bound} = {need:.4g}")
    eps = (1.0 / 32.0 if weighted else 1e-3) if eps is None else float(eps)

    def w(x):
        x = np.asarray(x, dtype=float)
        xn = np.maximum(x[..., -1], 0.0)
        base = -np.sum(x[..., :-1] ** 2, axis=-1) + A * xn ** 2
        if weighted:
            return c * (base + eps * xn ** (1.0 - s))
        with np.errstate(divide="ignore"):
            tail = np.log(xn) if s == 1.0 else -xn ** (1.0 - s)
        return c * (base + eps * tail)

    return w, A


def audit_standard_barrier(problem: LinearizedProblem, n: int = 64, A: float | None = None,
                           slab: float = 0.5, eps: float | None = None,
                           floor: float | None = None) -> BarrierCheck:
    """Discrete ``L_s`` of the barrier on interior rows of ``{|x'| < 1, floor <= x_n < slab}``.

    ``floor`` defaults to the second row for ``s < 1`` and to ``8h`` for
    ``s >= 1``, where the singular term is only controlled away from
    ``x_n = 0`` (the strip ``x_n >= d(eps)``).
    """
    w, A = standard_barrier(problem, A, eps=eps)
    g = half_ball_grid(n)
    if floor is None:
        floor = 1.5 * g.h if problem.s < 1.0 else 8.0 * g.h
    coef = stencil(problem, g, closure=False)
    vals = apply_operator(coef, w(g.points()))
    x = g.points()
    sel = (np.abs(x[..., 0]) < 1.0) & (x[..., 1] < slab) & (x[..., 1] >= floor - 1e-12)
    sel[0, :] = sel[-1, :] = False
    sel[:, 0] = sel[:, -1] = False
    exact = 2.0 * (A * (1.0 + problem.s) - float(np.trace(problem.a[:-1, :-1])))
    mn = float(vals[sel].min())
    return BarrierCheck(mn > 0.0, A, mn, exact)


# ----------------------------------------------------------------------------
# the ODE u'' + s u'/t = f on (0, 1/2)
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ODEProblem:
    """``u'' + s u'/t = f(t)`` on ``(0, 1/2]`` with ``|f| <= C(1 + t^(alpha-1))``.

    With ``singular=True`` the callable ``f`` is the bounded factor ``g`` of
    the right-hand side ``t^(alpha-1) g(t)``; otherwise it is the bounded
    right-hand side itself.
    """

    s: float
    f: object
    alpha: float = 1.0
    singular: bool = False

    def __post_init__(self):
        if self.s <= -1.0:
            raise LinearizedError("s must exceed -1")
        if not 0.0 < self.alpha <= 1.0:
            raise LinearizedError("alpha must lie in (0, 1]")
        if self.s + self.alpha <= 0.0:
            raise LinearizedError("t^s f must be integrable at 0 (s + alpha > 0)")

    def rhs(self, t):
        t = np.asarray(t, dtype=float)
        return t ** self.weight_exponent * self.f(t)

    @property
    def weight_exponent(self) -> float:
        """Exponent ``e`` with ``f(t) = t^e g(t)``."""
        return self.alpha - 1.0 if self.singular else 0.0


def _qaws(func, t, expo, log=False):
    if t <= 0.0:
        return 0.0
    kw = dict(weight="alg-loga" if log else "alg", wvar=(expo, 0.0),
              epsabs=1e-15, epsrel=1e-12, limit=200)
    return quad(func, 0.0, t, **kw)[0]


def particular_solution(p: ODEProblem, t: float) -> float:
    """Variation of parameters with zero data at ``t = 0``.

    ``ubar(t) = int_0^t tau^s f(tau) G(tau, t) dtau`` with
    ``G = (t^(1-s) - tau^(1-s))/(1-s)`` or ``log(t/tau)`` when ``s = 1``.
    The algebraic endpoint weights are integrated exactly by QAWS.
    """
    e = p.weight_exponent
    s = p.s
    g = p.f
    if t <= 0.0:
        return 0.0
    i1 = _qaws(g, t, s + e)
    if abs(s - 1.0) < 1e-14:
        i2 = _qaws(g, t, s + e, log=True)
        return math.log(t) * i1 - i2
    i2 = _qaws(g, t, 1.0 + e)
    return (t ** (1.0 - s) * i1 - i2) / (1.0 - s)


@dataclass(frozen=True)
class ODESolution:
    problem: ODEProblem
    c1: float
    c2: float
    branch: str

    def homogeneous(self, t):
        t = np.asarray(t, dtype=float)
        if self.branch == "log":
            return np.log(t)
        return t ** (1.0 - self.problem.s)

    def ubar(self, t):
        return np.vectorize(lambda x: particular_solution(self.problem, float(x)))(t)

    def __call__(self, t):
        return self.c1 * self.homogeneous(t) + self.c2 + self.ubar(t)


def ode_solve(p: ODEProblem, u_right: float, t_right: float = 0.5,
              u_left: float | None = None, t_left: float | None = None) -> ODESolution:
    """General solution ``c1 t^(1-s) + c2 + ubar`` (``c1 log t`` when ``s = 1``).

    With only ``u_right`` given, the weighted condition ``phi_s = 0`` (that
    is ``c1 = 0``) closes the system; a second value ``u(t_left)`` instead
    fixes both constants.
    """
    branch = "log" if abs(p.s - 1.0) < 1e-14 else "power"
    sol0 = ODESolution(p, 0.0, 0.0, branch)
    ub_r = particular_solution(p, t_right)
    if u_left is None:
        return ODESolution(p, 0.0, float(u_right - ub_r), branch)
    if t_left is None or not 0.0 < t_left < t_right:
        raise LinearizedError("t_left must lie in (0, t_right)")
    ub_l = particular_solution(p, t_left)
    M = np.array([[float(sol0.homogeneous(t_left)), 1.0],
                  [float(sol0.homogeneous(t_right)), 1.0]])
    c1, c2 = np.linalg.solve(M, [u_left - ub_l, u_right - ub_r])
    return ODESolution(p, float(c1), float(c2), branch)


# ----------------------------------------------------------------------------
# boundary expansion fit
# ----------------------------------------------------------------------------

@dataclass
class ExpansionFit:
    x0: float
    a_prime: float
    c1_est: float
    c2_est: float
    mu_est: float | None
    remainder_exponent: float | None
    a_dot_omega: float | None = None
    flagged: bool = False
    radii: list = field(default_factory=list)
    remainders: list = field(default_factory=list)

    def row(self) -> dict:
        return {"x0": self.x0, "a_prime": self.a_prime, "c1_est": self.c1_est,
                "mu_est": self.mu_est}


def _line_fit(t, v, s, alpha):
    if abs(s - 1.0) < 1e-14:
        b1 = np.log(t)
    else:
        b1 = t ** (1.0 - s)
    A = np.column_stack([b1, np.ones_like(t), t ** (1.0 + alpha)])
    scale = np.abs(A).max(axis=0)
    sol = np.linalg.lstsq(A / scale, v, rcond=None)[0] / scale
    return sol


def expansion_fit(phi: ScalarField, s: float, x0: float = 0.0, alpha: float = 1.0,
                  window: tuple | None = None, omega=None, c1_tol: float | None = None,
                  tangential: float = 0.2) -> ExpansionFit:
    """Fit ``c1 x_n^(1-s) + c2 + c3 x_n^(1+alpha)`` on vertical lines near ``x0``.

    The fitting window is ``x_n in [4h, 0.2]`` (at least eight nodes). The
    trace ``c2(x')`` is fitted by a quadratic in ``x' - x0`` over
    ``|x' - x0| <= tangential`` to give ``a'``. The remainder
    ``max |phi - c2(x0) - a'(x' - x0)|`` over half balls of dyadic radii gives
    the exponent ``1 + mu``. ``flagged`` is set when ``|c1| > c1_tol``
    (default ``10 h^min(1, s+1)``).
    """
    g = phi.grid
    h = g.h
    lo, hi = (FIT_WINDOW[0] * h, FIT_WINDOW[1]) if window is None else window
    xs, xn = g.axes()
    rows = (xn >= lo - 1e-12) & (xn <= hi + 1e-12)
    if rows.sum() < MIN_FIT_NODES:
        raise ResolutionError(f"{rows.sum()} nodes in the fitting window, need {MIN_FIT_NODES}")
    t = xn[rows]
    cols = np.flatnonzero(np.abs(xs - x0) <= tangential + 1e-12)
    fits = np.array([_line_fit(t, phi.values[c, rows], s, alpha) for c in cols])
    j0 = cols[np.argmin(np.abs(xs[cols] - x0))]
    k0 = int(np.flatnonzero(cols == j0)[0])
    c1, c2 = float(fits[k0, 0]), float(fits[k0, 1])
    dx = xs[cols] - x0
    pa = np.polyfit(dx, fits[:, 1], 2)
    a_prime = float(pa[1])
    trace0 = float(pa[2])
    # dyadic remainders
    radii, rems = [], []
    x = g.points()
    pv = phi.values
    r = 0.4
    while r >= 4.0 * h:
        d = np.hypot(x[..., 0] - x0, x[..., 1])
        sel = d <= r
        if np.any(sel):
            rem = np.abs(pv[sel] - trace0 - a_prime * (x[..., 0][sel] - x0)).max()
            radii.append(r)
            rems.append(float(rem))
        r *= 0.5
    expo = None
    ok = np.asarray(rems) > 1e-13
    if ok.sum() >= 2:
        expo = float(np.polyfit(np.log(np.asarray(radii)[ok]), np.log(np.asarray(rems)[ok]), 1)[0])
    mu = None if expo is None else expo - 1.0
    adw = None
    if omega is not None:
        om = check_direction(omega, 2)
        k = om[0] / om[1]
        a_full = np.array([a_prime, -k * a_prime])
        adw = float(a_full @ om)
    tol = 10.0 * h ** min(1.0, s + 1.0) if c1_tol is None else c1_tol
    return ExpansionFit(float(x0), a_prime, c1, c2, mu, expo, adw, bool(abs(c1) > tol),
                        radii, rems)
