"""Right-hand sides ``h``, Alt-Phillips potentials, energies and residuals.

The degenerate problem is ``Delta w = h(grad w)/w`` on ``{w > 0}`` where ``h``
is positive inside a star-shaped set ``D`` and negative outside. For the
Alt-Phillips family ``Delta u = gamma u^(gamma-1)`` the change of variables
``w = u^(1/beta)``, ``beta = 2/(2-gamma)``, gives the quadratic right-hand side
``h(p) = gamma/beta - (beta-1)|p|^2`` with ``D`` a ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fields import ScalarField, gradient, laplacian
from .geometry import StarDomain

PROFILE_DENSITY = 1024    # profile samples per unit of d
CLAMP_FACTOR = 10.0
DEFAULT_BLEND = 0.5    # gradient blend length, in units of h
DEFAULT_POS = 0.5      # positivity threshold for residual audits, in units of h


class PotentialError(ValueError):
    """Invalid right-hand side or potential."""


def beta_of_gamma(gamma: float) -> float:
    if not 0.0 < gamma < 2.0:
        raise PotentialError(f"gamma must lie in (0, 2), got {gamma}")
    return 2.0 / (2.0 - gamma)


def rho_of_gamma(gamma: float) -> float:
    """Radius of the constraint ball for the quadratic right-hand side."""
    b = beta_of_gamma(gamma)
    return math.sqrt(gamma / (b * (b - 1.0)))


@dataclass(frozen=True, eq=False)
class HFunction:
    """Right-hand side ``h`` with ``h = 0`` exactly on ``partial D``.

    ``kind='quadratic'`` is ``coef[0] - coef[1] |p|^2``. ``kind='radial_table'``
    is ``g(1 - |p|/f(p/|p|))`` with ``f`` the radial function of ``domain`` and
    ``g`` a profile tabulated on a uniform grid of ``d``. Gradients are clamped
    to ``|p| <= clamp_radius`` before evaluation.
    """

    kind: str
    domain: StarDomain
    C_h: float
    clamp_radius: float
    coef: tuple = (0.0, 0.0)
    gamma: float | None = None
    profile_d0: float = 0.0
    profile_dd: float = 1.0
    profile_g: np.ndarray | None = None

    def kernel_args(self) -> tuple:
        kind = 0 if self.kind == "quadratic" else 1
        g = self.profile_g if self.profile_g is not None else np.zeros(2)
        return (kind, np.asarray(self.coef, dtype=float),
                np.ascontiguousarray(self.domain.radial, dtype=float),
                float(self.profile_d0), float(self.profile_dd),
                np.ascontiguousarray(g, dtype=float), float(self.clamp_radius))

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        dim = self.domain.dim
        if p.shape[-1] != dim:
            raise PotentialError(f"gradient must have {dim} components")
        px = p[..., 0]
        py = p[..., 1] if dim == 2 else np.zeros_like(px)
        out = kernels._numpy.h_eval(px, py, dim == 1, *self.kernel_args())
        return np.asarray(out, dtype=float)

    def check_hypotheses(self, samples: int = 257, tol: float = 1e-10) -> dict:
        """Sample ``h`` along rays and check sign, zero set and ``h >= -C_h|p|^2``.

        Returns a dict with the measured growth constant; raises
        :class:`PotentialError` naming the failed property otherwise.
        """
        dom = self.domain
        nu = dom.directions()
        f = dom.radial
        worst_growth = 0.0
        for k in range(nu.shape[0]):
            t = np.linspace(0.0, self.clamp_radius / f[k], samples)
            vals = self(t[:, None] * f[k] * nu[k])
            inside = t < 1.0 - 1e-9
            outside = t > 1.0 + 1e-9
            if np.any(vals[inside] < -tol):
                raise PotentialError(f"h < 0 inside D along nu = {nu[k].tolist()}")
            if np.any(vals[outside] > tol):
                raise PotentialError(f"h > 0 outside D along nu = {nu[k].tolist()}")
            on = float(self(f[k] * nu[k][None])[0])
            if abs(on) > 1e-8:
                raise PotentialError(f"h != 0 on the boundary of D (h = {on:.3g})")
            r = t[1:] * f[k]
            worst_growth = max(worst_growth, float(np.max(-vals[1:] / (r * r))))
        if worst_growth > self.C_h * (1.0 + 1e-9) + tol:
            raise PotentialError(
                f"growth bound h >= -C_h |p|^2 fails: need C_h >= {worst_growth:.6g}")
        return {"growth_measured": worst_growth, "C_h": self.C_h}


def h_quadratic(gamma: float, dim: int = 2) -> HFunction:
    """``h(p) = gamma/beta - (beta-1)|p|^2`` on a ball of radius ``rho``."""
    b = beta_of_gamma(gamma)
    rho = rho_of_gamma(gamma)
    dom = StarDomain.ball(rho, dim=dim)
    return HFunction("quadratic", dom, C_h=b - 1.0,
                     clamp_radius=CLAMP_FACTOR / dom.delta,
                     coef=(gamma / b, b - 1.0), gamma=gamma)


def h_radial_table(domain: StarDomain, profile, C_h: float | None = None,
                   density: int = PROFILE_DENSITY) -> HFunction:
    """``h(p) = g(1 - |p|/f(p/|p|))`` with ``g`` given as callable or ``(d, g)``.

    ``g`` must vanish at 0, be nonnegative on ``[0, 1]`` and nonpositive for
    negative arguments. ``C_h=None`` uses the measured growth constant.
    """
    clamp = CLAMP_FACTOR / domain.delta
    # uniform d-grid with spacing 1/density that contains d = 0 exactly
    n_neg = int(math.ceil((clamp / domain.f_min - 1.0) * density))
    dd = 1.0 / density
    d0 = -n_neg * dd
    d = d0 + dd * np.arange(n_neg + density + 1)
    if callable(profile):
        g = np.array([profile(x) for x in d], dtype=float)
    else:
        dt, gt = (np.asarray(a, dtype=float) for a in profile)
        if dt[0] > d0 + 1e-12 or dt[-1] < 1.0 - 1e-12:
            raise PotentialError(f"profile table must cover [{d0:.6g}, 1]")
        g = np.interp(d, dt, gt)
    if not np.all(np.isfinite(g)):
        raise PotentialError("profile values must be finite")
    if abs(float(g[n_neg])) > 1e-12:
        raise PotentialError("profile must vanish at d = 0")
    hf = HFunction("radial_table", domain, C_h=np.inf, clamp_radius=clamp,
                   profile_d0=d0, profile_dd=dd, profile_g=g)
    rep = hf.check_hypotheses()
    ch = rep["growth_measured"] if C_h is None else float(C_h)
    hf = HFunction("radial_table", domain, C_h=ch, clamp_radius=clamp,
                   profile_d0=d0, profile_dd=dd, profile_g=g)
    hf.check_hypotheses()
    return hf


def ellipse_h(a: float = 2.0, b: float = 1.0, samples: int = 720) -> HFunction:
    """``h = 1 - p1^2/a^2 - p2^2/b^2`` written as a radial table."""
    dom = StarDomain.ellipse(a, b, samples)
    return h_radial_table(dom, lambda d: 1.0 - (1.0 - d) ** 2)


@dataclass(frozen=True)
class Potential:
    """Alt-Phillips potential ``W(t) = max(t, 0)^gamma`` with a regularised
    derivative used only for residual audits."""

    gamma: float
    t_reg: float = 0.0

    def __post_init__(self):
        beta_of_gamma(self.gamma)
        if self.t_reg < 0:
            raise PotentialError("t_reg must be nonnegative")

    def W(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.where(t > 0.0, t, 1.0)
        return np.where(t > 0.0, tp ** self.gamma, 0.0)

    def dW(self, t):
        t = np.asarray(t, dtype=float)
        tr = np.maximum(t, self.t_reg) if self.t_reg > 0 else np.where(t > 0, t, 1.0)
        return np.where(t > 0.0, self.gamma * tr ** (self.gamma - 1.0), 0.0)


def u_to_w(u: ScalarField, gamma: float) -> ScalarField:
    u.require_nonnegative("u")
    return u.with_values(u.values ** (1.0 / beta_of_gamma(gamma)))


def w_to_u(w: ScalarField, gamma: float) -> ScalarField:
    w.require_nonnegative("w")
    return w.with_values(w.values ** beta_of_gamma(gamma))


def _weights(grid):
    """Trapezoid node weights and boundary-halved edge weights."""
    h = grid.h
    wn = np.full(grid.shape, h ** grid.dim)
    edges = []
    for a in range(grid.dim):
        sl = [slice(None)] * grid.dim
        for end in (0, -1):
            sl[a] = end
            wn[tuple(sl)] *= 0.5
        shape = list(grid.shape)
        shape[a] -= 1
        we = np.full(shape, h ** grid.dim)
        for b in range(grid.dim):
            if b == a:
                continue
            sl = [slice(None)] * grid.dim
            for end in (0, -1):
                sl[b] = end
                we[tuple(sl)] *= 0.5
        edges.append(we)
    return wn, edges


def energy_J(u: ScalarField, pot: Potential | float) -> float:
    """Discrete ``int 1/2 |grad u|^2 + W(u)``.

    The gradient term uses edge differences (exact at edge midpoints), the
    potential term nodal values; both with trapezoid weights. Its nodal
    restriction is the local functional minimised by the sweeps.
    """
    if not isinstance(pot, Potential):
        pot = Potential(float(pot))
    wn, we = _weights(u.grid)
    v = u.values
    total = float(np.sum(wn * pot.W(v)))
    for a in range(u.grid.dim):
        d = np.diff(v, axis=a) / u.grid.h
        total += float(np.sum(we[a] * 0.5 * d * d))
    return total


@dataclass(frozen=True, eq=False)
class ResidualReport:
    field: ScalarField
    mask: np.ndarray
    sup: float
    l2: float
    n_nodes: int


def audit_mask(w: ScalarField, threshold: float) -> np.ndarray:
    """Free nodes with ``w > threshold`` whose whole stencil is positive."""
    v = w.values
    m = (v > threshold) & ~w.boundary_mask & ~w.grid.box_edge_mask()
    for a in range(w.grid.dim):
        for s in (-1, 1):
            idx = np.clip(np.arange(v.shape[a]) + s, 0, v.shape[a] - 1)
            m &= np.take(v, idx, axis=a) > 0.0
    return m


def residual_w(w: ScalarField, hfun: HFunction, floor: float | None = None,
               threshold: float | None = None, blend: float | None = None) -> ResidualReport:
    """``Delta_h w - h(grad_h w)/max(w, floor)`` on the audit nodes.

    Defaults: ``floor = h/2``, ``threshold = DEFAULT_POS h`` and the solver's
    blended one-sided gradient with blend length ``DEFAULT_BLEND h``.
    """
    g = w.grid
    floor = 0.5 * g.h if floor is None else floor
    threshold = DEFAULT_POS * g.h if threshold is None else threshold
    blend = DEFAULT_BLEND * g.h if blend is None else blend
    lap = laplacian(w).values
    grad = gradient(w, "one_sided", blend=blend)
    if grad.shape[-1] != hfun.domain.dim:
        raise PotentialError("dimension of h does not match the field")
    res = lap - hfun(grad) / np.maximum(w.values, floor)
    mask = audit_mask(w, threshold)
    out = np.where(mask, res, 0.0)
    vals = res[mask]
    sup = float(np.max(np.abs(vals))) if vals.size else 0.0
    l2 = float(np.sqrt(np.sum(vals ** 2) * g.h ** g.dim))
    return ResidualReport(ScalarField(g, out, w.boundary_mask), mask, sup, l2, int(vals.size))


@dataclass(frozen=True)
class Profile1D:
    """Exact 1D Alt-Phillips profile ``u = c ((x - a)^+)^beta``."""

    gamma: float
    a: float = 0.0
    direction: float = 1.0

    @property
    def beta(self) -> float:
        return beta_of_gamma(self.gamma)

    @property
    def c(self) -> float:
        b = self.beta
        return (self.gamma / (b * (b - 1.0))) ** (1.0 / (2.0 - self.gamma))

    def u(self, x):
        s = np.maximum(self.direction * (np.asarray(x, dtype=float) - self.a), 0.0)
        return self.c * s ** self.beta

    def w(self, x):
        return self.u(x) ** (1.0 / self.beta)

    @property
    def slope_w(self) -> float:
        """Constant slope of ``w`` on the positive side, equal to ``rho``."""
        return self.c ** (1.0 / self.beta)


def exact_1d_profile(gamma: float, a: float = 0.0) -> Profile1D:
    return Profile1D(gamma, a)

