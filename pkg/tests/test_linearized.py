"""The degenerate linear problem, the shear, the ODE and the expansion fit."""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse.linalg import spsolve

from degenfb.fields import GridError, ResolutionError, ScalarField
from degenfb.geometry import unit
from degenfb.linearized import (LinearizedError, LinearizedProblem, ODEProblem,
                                Ls_residual, audit_standard_barrier, domain_variation,
                                drift_residual, expansion_fit, half_ball_fixed,
                                half_ball_grid, inverse_domain_variation, ode_solve,
                                particular_solution, solve_Ls, standard_barrier)


def quadratic(s):
    A = 1.0 / (1.0 + s)
    return lambda x: -x[..., 0] ** 2 + A * x[..., 1] ** 2


def quartic(s):
    c, d = 6.0 / (1.0 + s), 3.0 / ((1.0 + s) * (3.0 + s))
    return lambda x: x[..., 0] ** 4 - c * x[..., 0] ** 2 * x[..., 1] ** 2 + d * x[..., 1] ** 4


def free_error(phi, exact):
    g = phi.grid
    free = ~half_ball_fixed(g)
    return float(np.abs(phi.values - exact(g.points()))[free].max())


# -- problem validation ----------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(a=np.eye(2), s=-0.95), dict(a=np.eye(2), s=11.0),
                                dict(a=[[1.0, 0.2], [0.1, 1.0]], s=0.5),
                                dict(a=[[1.0, 0.0], [0.0, 2.0]], s=0.5),
                                dict(a=[[1.0, 2.0], [2.0, 1.0]], s=0.5),
                                dict(a=np.eye(2), s=0.5, delta=0.0)])
def test_problem_rejects(kw):
    with pytest.raises(LinearizedError):
        LinearizedProblem(**kw)


def test_branches():
    assert LinearizedProblem.laplacian(0.5).branch == "weighted"
    assert LinearizedProblem.laplacian(1.0).branch == "bounded"
    with pytest.raises(LinearizedError):
        LinearizedProblem.from_direction(unit([1.0, 0.05]), 0.5)


# -- solve_Ls --------------------------------------------------------------------

@pytest.mark.parametrize("s", [-0.5, 0.0, 0.5, 2.0])
def test_quadratic_closed_form_is_reproduced(s):
    # -x1^2 + x2^2/(1+s) is even in x_n and the stencil is exact on quadratics
    p = LinearizedProblem.laplacian(s)
    phi, rep = solve_Ls(p, quadratic(s), n=16, method="direct")
    assert rep.converged and free_error(phi, quadratic(s)) <= 1e-11
    assert f"branch_{p.branch}" in rep.flags


@pytest.mark.parametrize("s", [-0.5, 0.5, 2.0])
def test_quartic_second_order(s):
    p = LinearizedProblem.laplacian(s)
    errs = [free_error(solve_Ls(p, quartic(s), n=n, method="direct")[0], quartic(s))
            for n in (16, 32, 64)]
    orders = [math.log2(a / b) for a, b in zip(errs[:-1], errs[1:])]
    assert min(orders) >= 1.8


def test_sor_matches_direct():
    p = LinearizedProblem.laplacian(0.5)
    data = quartic(0.5)
    a, rep = solve_Ls(p, data, n=16, tol=1e-13)
    b, _ = solve_Ls(p, data, n=16, method="direct")
    assert rep.converged and np.abs(a.values - b.values).max() <= 1e-10
    assert rep.residual_sup <= 1e-10


def test_constant_data():
    phi, rep = solve_Ls(LinearizedProblem.laplacian(0.3), lambda x: 0 * x[..., 0] + 2.5, n=16)
    assert rep.converged and np.allclose(phi.values, 2.5, atol=1e-11)


def test_nonconvergence_is_flagged():
    _, rep = solve_Ls(LinearizedProblem.laplacian(0.5), quartic(0.5), n=16, max_sweeps=3)
    assert not rep.converged and "max_iters" in rep.flags


def test_s_zero_matches_reflected_dirichlet_solve():
    # s = 0 with the even closure is the five-point Laplacian on the full disc
    # for data even in x_n; assemble that problem independently
    n = 16
    data = lambda x: np.exp(x[..., 0]) * np.cos(x[..., 1]) + x[..., 1] ** 2
    phi, _ = solve_Ls(LinearizedProblem.laplacian(0.0), data, n=n, method="direct")
    xs, top = phi.grid.axes()
    ys = np.concatenate([-top[::-1], top])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    fixed = np.hypot(X, Y) >= 1.0 - 1e-12
    fixed[[0, -1], :] = fixed[:, [0, -1]] = True
    N = X.size
    idx = np.arange(N).reshape(X.shape)
    L = sp.lil_matrix((N, N))
    b = np.zeros(N)
    for i, j in zip(*np.nonzero(fixed)):
        L[idx[i, j], idx[i, j]] = 1.0
        b[idx[i, j]] = data(np.array([X[i, j], Y[i, j]]))
    for i, j in zip(*np.nonzero(~fixed)):
        L[idx[i, j], idx[i, j]] = -4.0
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            L[idx[i, j], idx[i + di, j + dj]] = 1.0
    full = spsolve(L.tocsr(), b).reshape(X.shape)
    upper = full[:, top.size:]
    assert np.abs(upper - phi.values).max() <= 1e-10


@given(c=st.lists(st.floats(-2.0, 2.0), min_size=6, max_size=6),
       s=st.sampled_from([-0.5, 0.5, 2.0]))
def test_linearity(c, s):
    p = LinearizedProblem.laplacian(s)
    d1 = lambda x: c[0] + c[1] * x[..., 0] + c[2] * np.sin(3 * x[..., 1])
    d2 = lambda x: c[3] * x[..., 0] ** 3 + c[4] * np.cos(x[..., 0] * x[..., 1]) + c[5]
    a = solve_Ls(p, d1, n=16, method="direct")[0].values
    b = solve_Ls(p, d2, n=16, method="direct")[0].values
    ab = solve_Ls(p, lambda x: d1(x) + d2(x), n=16, method="direct")[0].values
    assert np.abs(ab - a - b).max() <= 1e-10


@given(seed=st.integers(0, 2 ** 31 - 1), s=st.sampled_from([-0.5, 0.5, 2.0]))
def test_discrete_maximum_principle(seed, s):
    rng = np.random.default_rng(seed)
    k = rng.normal(size=(4, 2))
    amp = rng.normal(size=4)
    data = lambda x: sum(a * np.sin(x @ kk) for a, kk in zip(amp, k))
    phi, _ = solve_Ls(LinearizedProblem.laplacian(s), data, n=16, method="direct")
    fixed = half_ball_fixed(phi.grid)
    bnd = phi.values[fixed & (np.linalg.norm(phi.grid.points(), axis=-1) < 1.2)]
    free = phi.values[~fixed]
    assert free.max() <= bnd.max() + 1e-10 and free.min() >= bnd.min() - 1e-10


# -- the ODE ---------------------------------------------------------------------

def test_ode_s_zero_lines():
    sol = ode_solve(ODEProblem(0.0, lambda t: 0.0 * t), 2.0, 0.5, u_left=1.0, t_left=0.25)
    t = np.linspace(0.05, 0.5, 7)
    assert np.allclose(sol(t), 4.0 * t, atol=1e-12)
    assert sol.c1 == pytest.approx(4.0) and abs(sol.c2) <= 1e-12


def test_ode_constant_rhs():
    p = ODEProblem(0.5, lambda t: 1.0 + 0.0 * t)
    t = np.array([0.1, 0.3, 0.5])
    assert np.allclose(ode_solve(p, 1.0).ubar(t), t ** 2 / 3.0, atol=1e-13)


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 3.0])
def test_ode_singular_rhs(s):
    alpha = 0.5
    p = ODEProblem(s, lambda t: 1.0 + 0.0 * t, alpha=alpha, singular=True)
    t = np.array([0.01, 0.2, 0.5])
    exact = t ** (1 + alpha) / ((1 + alpha) * (alpha + s))
    assert np.allclose([particular_solution(p, x) for x in t], exact, rtol=1e-10)


@pytest.mark.parametrize("s", [-0.5, 0.5, 1.0, 2.0])
def test_ode_substitution(s):
    # u'' + s u'/t = f by fourth-order differences
    p = ODEProblem(s, np.cos)
    sol = ode_solve(p, 1.0, u_left=0.3, t_left=0.1)
    for t in (0.15, 0.3, 0.45):
        k = 1e-3
        u = sol(np.array([t - 2 * k, t - k, t, t + k, t + 2 * k]))
        d1 = (u[0] - 8 * u[1] + 8 * u[3] - u[4]) / (12 * k)
        d2 = (-u[0] + 16 * u[1] - 30 * u[2] + 16 * u[3] - u[4]) / (12 * k * k)
        assert d2 + s * d1 / t == pytest.approx(math.cos(t), abs=1e-6)
    assert sol.branch == ("log" if s == 1.0 else "power")


def test_ode_log_branch():
    p = ODEProblem(1.0, lambda t: 0.0 * t)
    sol = ode_solve(p, 0.0, 0.5, u_left=1.0, t_left=0.25)
    assert sol.branch == "log"
    t = np.array([0.2, 0.4])
    assert np.allclose(sol(t), np.log(t / 0.5) / math.log(0.5), atol=1e-12)


def test_ode_weighted_condition_kills_c1():
    sol = ode_solve(ODEProblem(0.5, np.cos), 1.0)
    assert sol.c1 == 0.0 and sol(np.array([0.5]))[0] == pytest.approx(1.0)


def test_ode_rejects():
    with pytest.raises(LinearizedError):
        ODEProblem(-1.0, np.cos)
    with pytest.raises(LinearizedError):
        ODEProblem(-0.6, np.cos, alpha=0.5, singular=True)
    with pytest.raises(LinearizedError):
        ode_solve(ODEProblem(0.5, np.cos), 1.0, u_left=0.0, t_left=0.7)


def test_ode_agrees_with_2d_solve():
    # x'-independent data solving the ODE: the 2D solve reproduces it along x' = 0
    s = 0.5
    p = ODEProblem(s, np.cos)
    sol = ode_solve(p, 1.0)
    table_t = np.linspace(0.0, 1.0, 2001)
    table_u = sol(np.maximum(table_t, 1e-300))
    exact = lambda x: np.interp(x[..., 1], table_t, table_u)
    errs = []
    for n in (16, 32):
        phi, _ = solve_Ls(LinearizedProblem.laplacian(s), exact, n=n,
                          rhs=lambda x: np.cos(x[..., 1]), method="direct")
        col = np.argmin(np.abs(phi.grid.axes()[0]))
        t = phi.grid.axes()[1]
        inside = t < 1.0
        errs.append(np.abs(phi.values[col, inside] - sol(t[inside])).max())
    assert errs[1] <= 1.0 / 32 and errs[1] < errs[0]


# -- expansion fit ---------------------------------------------------------------

@pytest.mark.parametrize("x0", [0.0, 0.3])
def test_expansion_fit_closed_form(x0):
    s = 0.5
    phi, _ = solve_Ls(LinearizedProblem.laplacian(s), quadratic(s), n=64, method="direct")
    fit = expansion_fit(phi, s, x0=x0)
    assert fit.a_prime == pytest.approx(-2 * x0, abs=1e-8)
    assert abs(fit.c1_est) <= 1e-8 and not fit.flagged
    assert fit.remainder_exponent == pytest.approx(2.0, abs=0.1)
    assert fit.mu_est >= 0.0


def test_expansion_fit_flags_violation():
    s = 0.5
    g = half_ball_grid(64)
    phi = ScalarField(g, np.maximum(g.points()[..., 1], 0.0) ** (1 - s), half_ball_fixed(g))
    fit = expansion_fit(phi, s)
    assert fit.c1_est == pytest.approx(1.0, abs=1e-8) and fit.flagged


def test_expansion_fit_c1_vanishes_under_refinement():
    s = -0.5
    data = lambda x: np.exp(x[..., 0]) * np.cos(2 * x[..., 1])
    c1 = [abs(expansion_fit(solve_Ls(LinearizedProblem.laplacian(s), data, n=n,
                                     method="direct")[0], s).c1_est) for n in (64, 128)]
    assert c1[1] < c1[0]


def test_expansion_fit_resolution_and_omega():
    g = half_ball_grid(16)
    phi = ScalarField(g, np.zeros(g.shape), half_ball_fixed(g))
    with pytest.raises(ResolutionError):
        expansion_fit(phi, 0.5)
    s = 0.5
    phi, _ = solve_Ls(LinearizedProblem.laplacian(s), quadratic(s), n=64, method="direct")
    fit = expansion_fit(phi, s, x0=0.2, omega=unit([0.3, 1.0]))
    assert abs(fit.a_dot_omega) <= 1e-12
    assert set(fit.row()) == {"x0", "a_prime", "c1_est", "mu_est"}


# -- domain variation ------------------------------------------------------------

def test_domain_variation_identity():
    g = half_ball_grid(16)
    phi = ScalarField(g, np.sin(g.points()[..., 0]) + g.points()[..., 1], half_ball_fixed(g))
    assert np.array_equal(domain_variation(phi, [0.0, 1.0]).values, phi.values)
    p = LinearizedProblem.from_direction([0.0, 1.0], 0.5)
    assert np.array_equal(p.a, np.eye(2)) and np.all(p.d == 0) and np.all(p.b == 0)


@pytest.mark.parametrize("theta", [0.2, -0.4])
def test_domain_variation_affine(theta):
    g = half_ball_grid(32)
    x = g.points()
    phi = ScalarField(g, 0.3 + 1.5 * x[..., 0] - 0.7 * x[..., 1], half_ball_fixed(g))
    om = np.array([math.sin(theta), math.cos(theta)])
    k = om[0] / om[1]
    out = domain_variation(phi, om)
    exact = 0.3 + 1.5 * (x[..., 0] + k * x[..., 1]) - 0.7 * x[..., 1]
    # the default radius keeps every sheared node of the half ball in the grid
    rad = min(1.0, (1.0 + g.h) / math.hypot(1.0, k))
    inside = np.linalg.norm(x, axis=-1) < rad
    assert np.abs(out.values - exact)[inside].max() <= 1e-12
    assert np.all(out.boundary_mask[~inside])


def test_domain_variation_roundtrip_second_order():
    om = unit([0.3, 1.0])
    errs = []
    for n in (32, 64):
        g = half_ball_grid(n)
        x = g.points()
        phi = ScalarField(g, np.sin(2 * x[..., 0]) * np.cos(x[..., 1]), half_ball_fixed(g))
        back = inverse_domain_variation(domain_variation(phi, om), om).values
        inner = np.linalg.norm(x, axis=-1) < 0.6
        errs.append(np.abs(back - phi.values)[inner].max())
    assert errs[1] <= 0.3 * errs[0]


def test_domain_variation_errors():
    g = half_ball_grid(16)
    phi = ScalarField(g, np.zeros(g.shape), half_ball_fixed(g))
    with pytest.raises(GridError, match="largest admissible"):
        domain_variation(phi, unit([1.0, 1.0]), radius=1.0)
    with pytest.raises(LinearizedError):
        domain_variation(phi, unit([1.0, 0.01]))


def test_sheared_operator_matches_drift_operator():
    # phi~(x) = phi(x' + k x_n, x_n): L_s phi~ at x equals (Delta + v.grad/x_n) phi at the image
    s = 0.7
    om = unit([0.25, 1.0])
    k = om[0] / om[1]
    v = s * om / om[1]
    p = LinearizedProblem.from_direction(om, s)
    f = lambda y: np.exp(0.5 * y[..., 0]) * np.cos(y[..., 1])
    f2 = lambda y: -np.exp(0.5 * y[..., 0]) * np.sin(y[..., 1])
    exact = lambda y: -0.75 * f(y) + (0.5 * v[0] * f(y) + v[1] * f2(y)) / y[..., 1]
    errs = []
    for n in (32, 64):
        g = half_ball_grid(n)
        x = g.points()
        img = np.stack([x[..., 0] + k * x[..., 1], x[..., 1]], axis=-1)
        lhs = Ls_residual(p, ScalarField(g, f(img), half_ball_fixed(g)))
        # rows away from x_n = 0, where the closure is not in play
        sel = (np.linalg.norm(x, axis=-1) < 0.5) & (x[..., 1] > 0.1)
        errs.append(np.abs(lhs - exact(img))[sel].max())
        # the unsheared drift operator has the same continuum limit
        rhs = drift_residual(ScalarField(g, f(x), half_ball_fixed(g)), v)
        assert np.abs(rhs - exact(x))[sel].max() <= 10 * g.h ** 2
    assert errs[1] <= 0.3 * errs[0] and errs[1] <= 10 * (1 / 64) ** 2


# -- barrier ---------------------------------------------------------------------

@pytest.mark.parametrize("problem", [LinearizedProblem.laplacian(-0.5),
                                     LinearizedProblem.laplacian(0.5),
                                     LinearizedProblem.laplacian(1.0),
                                     LinearizedProblem.laplacian(3.0),
                                     LinearizedProblem.from_direction(unit([0.3, 1.0]), 0.5)])
def test_standard_barrier_audit(problem):
    chk = audit_standard_barrier(problem, n=64)
    assert chk.ok and chk.min_value > 0.0
    lam = problem.ellipticity[1]
    assert chk.A > lam / (problem.delta if problem.s < 1 else 2.0)
    assert chk.exact == pytest.approx(2 * (chk.A * (1 + problem.s) - problem.a[0, 0]))
    # the x_n^(1-s) (or log) term is L_s-harmonic, so the audit tracks the exact value
    assert chk.min_value == pytest.approx(chk.exact, rel=0.05)


def test_standard_barrier_rejects_small_a():
    with pytest.raises(LinearizedError, match="delta"):
        standard_barrier(LinearizedProblem.laplacian(0.5), A=1.0)
    with pytest.raises(LinearizedError, match="/2"):
        standard_barrier(LinearizedProblem.laplacian(2.0), A=0.5)
    w, _ = standard_barrier(LinearizedProblem.laplacian(1.0), eps=0.1)
    assert w(np.array([0.0, math.e ** -1])) == pytest.approx(1.1 * 0.5 * math.e ** -2 - 0.1)


def test_two_dimensional_only():
    with pytest.raises(LinearizedError):
        solve_Ls(LinearizedProblem.laplacian(0.5, dim=3), quadratic(0.5), n=8)
