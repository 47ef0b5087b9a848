"""Obstacle, Alt-Phillips, degenerate and Perron solvers, seeds, barriers."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenfb.fb_analysis import extract_free_boundary
from degenfb.fields import Grid, ScalarField
from degenfb.potentials import ellipse_h, energy_J, exact_1d_profile, h_quadratic, u_to_w
from degenfb.solvers import (Barrier, BarrierRegimeError, BoundaryData, SeedParameterError,
                             SolverConfig, SolverError, barrier_eval, check_seed_parameters,
                             default_seed_parameters, holder_seminorm, inf_convolution,
                             perron_envelope, slab_min_A, solve_alt_phillips,
                             solve_degenerate, solve_obstacle, subsolution_seed,
                             supersolution_audit, supersolution_seed)
from degenfb.solvers.variational import euler_lagrange_residual

HQ = h_quadratic(1.0)


def profile_data(gamma, a, n):
    g = Grid((-1.0,), 2.0 / n, (n,))
    return BoundaryData(lambda x: exact_1d_profile(gamma, a).u(x[..., 0]), domain="box"), g


def fb_1d(u, gamma=1.0):
    """Free boundary of ``w = u^(1/beta)``, which grows linearly off ``F``."""
    fb = extract_free_boundary(u_to_w(u, gamma))
    assert fb.points.shape[0] == 1
    return float(fb.points[0, 0])


# -- config ----------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(theta=0.0), dict(theta=1.5), dict(floor=0.2),
                                dict(tol_residual=0.0), dict(scheme="newton"),
                                dict(omega=2.0)])
def test_solver_config_rejects(kw):
    with pytest.raises(SolverError):
        SolverConfig(**kw)


# -- obstacle --------------------------------------------------------------------

def test_obstacle_1d_oracle():
    bd, g = profile_data(1.0, 0.0, 512)
    u, rep = solve_obstacle(bd, g)
    exact = 0.5 * np.maximum(g.axes()[0], 0) ** 2
    assert rep.converged
    assert np.abs(u.values - exact).max() <= 5 * g.h
    assert abs(fb_1d(u)) <= 2 * g.h


def test_obstacle_zero_data():
    u, rep = solve_obstacle(BoundaryData.constant(0.0, domain="box"), Grid.box(1.0, 32))
    assert rep.converged and np.all(u.values == 0)


def test_obstacle_large_data_solves_poisson():
    g = Grid.box(1.0, 64, dim=1)
    u, rep = solve_obstacle(BoundaryData.constant(2.0, domain="box"), g)
    x = g.axes()[0]
    assert np.all(u.values > 0)
    # Delta u = 1 with u(+-1) = 2: the discrete stencil is exact on this quadratic
    assert np.allclose(u.values, 2.0 + 0.5 * (x ** 2 - 1.0), atol=1e-9)


# -- Alt-Phillips ----------------------------------------------------------------

def test_alt_phillips_gamma_one_matches_obstacle():
    bd, g = profile_data(1.0, 0.1, 512)
    uo, _ = solve_obstacle(bd, g)
    ua, rep = solve_alt_phillips(bd, 1.0, g)
    assert rep.converged
    assert abs(fb_1d(uo) - fb_1d(ua, 1.0)) <= 2 * g.h
    assert np.abs(uo.values - ua.values).max() <= g.h


@pytest.mark.parametrize("gamma", [0.5, 1.5])
def test_alt_phillips_profile(gamma):
    a = 0.1234
    bd, g = profile_data(gamma, a, 1024)
    u, rep = solve_alt_phillips(bd, gamma, g)
    exact = exact_1d_profile(gamma, a).u(g.axes()[0])
    assert rep.converged and rep.energy_monotone
    assert np.abs(u.values - exact).max() <= 5 * g.h
    assert abs(fb_1d(u, gamma) - a) <= 2 * g.h


def test_alt_phillips_zero_data():
    g = Grid.box(1.0, 32)
    u, rep = solve_alt_phillips(BoundaryData.constant(0.0, domain="box"), 0.5, g)
    assert np.all(u.values == 0) and energy_J(u, 0.5) == 0.0


def test_alt_phillips_2d_energy_trace_and_residual():
    g = Grid.box(1.0, 32)
    bd = BoundaryData.constant(0.3)
    cfg = SolverConfig(scheme="alt_phillips", tol_residual=1e-10)
    u, rep = solve_alt_phillips(bd, 0.7, g, cfg)
    e = np.asarray(rep.energy_trace)
    assert rep.converged
    assert np.all(np.diff(e) <= 1e-12 * np.maximum(1, np.abs(e[:-1])))
    _, scaled = euler_lagrange_residual(u.array2d(), u.mask2d(), g.h, 0.7, g.h ** 2)
    assert scaled <= 1e-10
    assert energy_J(u, 0.7) == pytest.approx(e[-1], rel=1e-14)


def test_alt_phillips_front_moves_lower_energy():
    bd, g = profile_data(0.5, 0.1234, 512)
    on, rep_on = solve_alt_phillips(bd, 0.5, g)
    off, rep_off = solve_alt_phillips(bd, 0.5, g, SolverConfig(scheme="alt_phillips",
                                                               tol_residual=1e-10, fb_moves=0))
    assert rep_on.extra["fb_moves"] >= 1
    assert energy_J(on, 0.5) < energy_J(off, 0.5)


# -- degenerate ------------------------------------------------------------------

@pytest.mark.parametrize("hfun,nu", [(HQ, (0.0, 1.0)), (ellipse_h(2, 1), (0.6, 0.8))])
def test_degenerate_half_plane(hfun, nu):
    g = Grid.box(1.0, 64)
    nu = np.asarray(nu)
    w, rep = solve_degenerate(BoundaryData.half_plane(hfun.domain, nu), hfun, g)
    exact = hfun.domain.f_of_nu(nu) * np.maximum(g.points() @ nu, 0)
    assert rep.converged and rep.positivity_stable
    assert np.abs(w.values - exact).max() <= 2 * g.h


def test_degenerate_zero_data():
    w, rep = solve_degenerate(BoundaryData.constant(0.0), HQ, Grid.box(1.0, 32))
    assert np.all(w.values == 0)


def test_degenerate_obstacle_equivalence():
    g = Grid.box(1.0, 64)
    bd = BoundaryData(lambda x: 0.5 * np.maximum(x[..., 0], 0.0) ** 2)
    u, _ = solve_obstacle(bd, g)
    bdw = BoundaryData(lambda x: np.maximum(x[..., 0], 0.0) / math.sqrt(2))
    w, rep = solve_degenerate(bdw, HQ, g)
    x = g.points()[..., 0]
    away = np.abs(x) > 2 * g.h
    assert np.abs(w.values - np.sqrt(u.values))[away].max() <= 10 * g.h
    assert np.abs(w.values - np.maximum(x, 0) / math.sqrt(2)).max() <= 2 * g.h


def test_degenerate_dimension_mismatch():
    with pytest.raises(SolverError):
        solve_degenerate(BoundaryData.constant(0.1), h_quadratic(1.0, dim=1), Grid.box(1, 16))


@settings(max_examples=6)
@given(st.floats(0.2, 0.6), st.floats(0.0, 0.3), st.floats(0, 2 * math.pi))
def test_degenerate_comparison(c, extra, t):
    g = Grid.box(1.0, 32)
    nu = np.array([math.cos(t), math.sin(t)])
    lo = BoundaryData(lambda x: c * (1 + 0.5 * (x @ nu)))
    hi = BoundaryData(lambda x: c * (1 + 0.5 * (x @ nu)) + extra)
    w1, _ = solve_degenerate(lo, HQ, g)
    w2, _ = solve_degenerate(hi, HQ, g)
    assert np.all(w1.values <= w2.values + 1e-9)


def test_scaling_covariance():
    errs = []
    r = 0.5
    for n in (32, 64):
        g = Grid.box(1.0, n)
        w1, _ = solve_degenerate(BoundaryData.constant(0.45), HQ, g)
        bd = BoundaryData(lambda x: w1(np.clip(r * x, -1, 1)) / r)
        w2, _ = solve_degenerate(bd, HQ, g)
        inner = np.linalg.norm(g.points(), axis=-1) < 1
        errs.append(np.abs(w2.values[inner] - w1(r * g.points()[inner]) / r).max())
        assert errs[-1] <= 0.5 * g.h / r
    assert errs[1] < errs[0]


# -- Perron ----------------------------------------------------------------------

def test_perron_half_plane_matches_degenerate():
    g = Grid.box(1.0, 32)
    bd = BoundaryData.half_plane(HQ.domain, [0.0, 1.0])
    wp, rp = perron_envelope(bd, HQ, g)
    wd, _ = solve_degenerate(bd, HQ, g)
    band = np.abs(g.points()[..., 1]) > 2 * g.h
    assert rp.converged
    assert np.abs(wp.values - wd.values)[band].max() <= g.h


def test_perron_constant_zero_patch_and_bounds():
    g = Grid.box(1.0, 32)
    w, rep = perron_envelope(BoundaryData.constant(0.3), HQ, g)
    assert rep.converged and np.any(w.values == 0)
    assert rep.extra["below_subsolution"] == 0.0
    assert rep.extra["above_supersolution"] == 0.0
    lo, hi = rep.extra["subsolution_seed"], rep.extra["supersolution_seed"]
    assert np.all(lo.values <= w.values + 1e-12) and np.all(w.values <= hi.values + 1e-12)


def test_perron_monotone_in_data():
    g = Grid.box(1.0, 32)
    w1, _ = perron_envelope(BoundaryData.constant(0.3), HQ, g)
    w2, _ = perron_envelope(BoundaryData.constant(0.35), HQ, g)
    assert np.all(w2.values >= w1.values - 1e-12)


# -- seeds -----------------------------------------------------------------------

def _unit_ball_nodes(g):
    r = np.linalg.norm(g.points(), axis=-1)
    return r, r < 1.0 - 1e-12


def test_seeds_zero_data():
    # inf over the sphere of C |(x - x0).nu|^(alpha/2) is C (1 - |x|)^(alpha/2)
    g = Grid.box(1.0, 16)
    bd = BoundaryData.constant(0.0)
    C, alpha = 1.3, 0.5
    psi = supersolution_seed(bd, g, C, alpha).values
    r, inside = _unit_ball_nodes(g)
    exact = C * (1.0 - r[inside]) ** (alpha / 2)
    assert np.all(psi[inside] >= exact - 1e-12)
    assert np.allclose(psi[inside], exact, rtol=1e-3, atol=1e-3)
    assert np.all(psi[~inside] == 0.0)
    assert np.all(subsolution_seed(bd, g, C, alpha).values == 0)


@pytest.mark.parametrize("C", [1.0, 1e6])
def test_seed_constant_data(C):
    g = Grid.box(1.0, 16)
    psi = supersolution_seed(BoundaryData.constant(1.0), g, C, 0.5).values
    r, inside = _unit_ball_nodes(g)
    assert np.all(psi[~inside] == 1.0)
    assert np.all(psi[inside] >= 1.0 + C * (1.0 - r[inside]) ** 0.25 * (1 - 1e-3))
    low = subsolution_seed(BoundaryData.constant(1.0), g, C, 0.5).values
    assert np.all(low <= psi) and np.all(low[~inside] == 1.0)


def test_seed_parameters_and_audit():
    g = Grid.box(1.0, 32)
    bd = BoundaryData.half_plane(HQ.domain, [0.0, 1.0])
    C, alpha = default_seed_parameters(bd, g, HQ)
    assert alpha <= 2 / (1 + HQ.C_h) + 1e-14
    check_seed_parameters(bd, g, HQ, C, alpha)
    psi = supersolution_seed(bd, g, C, alpha, HQ)
    assert supersolution_audit(psi, HQ)["ok"]
    steep = h_quadratic(1.5)   # C_h = 3 caps alpha at 1/2
    with pytest.raises(SeedParameterError, match="alpha <= 0.5"):
        check_seed_parameters(bd, g, steep, 1e3, 0.75)
    with pytest.raises(SeedParameterError, match=r"\(0, 1\]"):
        check_seed_parameters(bd, g, HQ, C, 1.5)
    with pytest.raises(SeedParameterError):
        check_seed_parameters(bd, g, HQ, 1e-3, alpha)


# -- inf-convolution -------------------------------------------------------------

def test_inf_convolution_properties():
    g = Grid.box(1.0, 16)
    spike = np.zeros(g.shape)
    spike[8, 8] = 5.0
    psi = ScalarField(g, 1.0 + spike)
    C, alpha = 1.0, 1.0
    bar = inf_convolution(psi, C, alpha)
    assert np.all(bar.values <= psi.values)
    assert bar.values[8, 8] < 5.0
    assert holder_seminorm(bar, alpha / 2) <= 2 * C * (1 + 1e-12)
    assert np.allclose(inf_convolution(bar, C, alpha).values, bar.values, atol=1e-14)
    smooth = ScalarField(g, 0.01 * g.points()[..., 0])
    assert np.allclose(inf_convolution(smooth, C, alpha).values, smooth.values)


# -- barriers --------------------------------------------------------------------

def test_barrier_radial_sub():
    f, audit = barrier_eval(Barrier("radial_sub", {"M": 0.5}), Grid.box(1.25, 160))
    assert audit.ok and audit.checks["laplacian_min"] > 0
    assert audit.checks["grad_at_one"] == pytest.approx(1.0)
    assert audit.checks["grad_at_one_discrete"] == pytest.approx(1.0, rel=0.05)


def test_barrier_slab_q():
    A = slab_min_A(1.0) + 0.5
    g = Grid.box(1.0, 64)
    f, audit = barrier_eval(Barrier("slab_Q", {"A": A, "omega": (0.0, 1.0)}), g)
    x = g.points()
    slab = (np.abs(x[..., 0]) <= 0.5) & (x[..., 1] >= -0.1) & (x[..., 1] <= 0.25)
    assert audit.ok
    assert audit.checks["omega_dot_grad_min"] == pytest.approx(
        (2 * A * x[..., 1] + 1)[slab & ~g.box_edge_mask()].min(), abs=1e-10)
    with pytest.raises(BarrierRegimeError):
        barrier_eval(Barrier("slab_Q", {"A": 1.5, "omega": (0.0, 1.0)}), g)


def test_barrier_holder_seed_and_radial_super():
    g = Grid.box(1.0, 32)
    f, audit = barrier_eval(Barrier("holder_seed", {"C": 2.0, "alpha": 0.5}), g, HQ)
    assert f((0.0, 0.0)) == 0.0 and audit.ok
    f, audit = barrier_eval(Barrier("radial_super", {"c_bar": 0.3}), g, HQ)
    assert audit.ok and np.all(f.values[np.linalg.norm(g.points(), axis=-1) <= 0.5] == 0)
    with pytest.raises(BarrierRegimeError):
        barrier_eval(Barrier("radial_super", {"c_bar": 1.0}), g, HQ)
    with pytest.raises(BarrierRegimeError):
        Barrier("cubic")
