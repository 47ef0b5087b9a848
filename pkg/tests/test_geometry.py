"""Star-shaped constraint sets, normals, gauges and the text table format."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize_scalar

from degenfb.geometry import (Gauge, GeometryError, StarDomain, StarShapeError, check_direction,
                              f_of_nu, gauge_eta, normal_at, read_star_table,
                              validate_star_shape, write_star_table)

angles = st.floats(0.0, 2.0 * math.pi, allow_nan=False)


def _dir(t):
    return np.array([math.cos(t), math.sin(t)])


def _ellipse_ray(t, a=2.0, b=1.0):
    """Independent ray/boundary intersection by root finding."""
    nu = _dir(t)
    return brentq(lambda r: (r * nu[0] / a) ** 2 + (r * nu[1] / b) ** 2 - 1.0, 1e-9, 10.0,
                  xtol=1e-15)


# -- f_of_nu -------------------------------------------------------------------

def test_f_ball_is_one(ball):
    for t in np.linspace(0, 2 * np.pi, 17):
        assert f_of_nu(ball, _dir(t)) == pytest.approx(1.0, abs=1e-14)


def test_f_ellipse_axis(ellipse):
    assert f_of_nu(ellipse, [1.0, 0.0]) == pytest.approx(2.0, abs=1e-12)


def test_f_ellipse_diagonal_matches_ray_root(ellipse):
    t = math.pi / 4
    # piecewise-linear angular interpolation: O(M^-2) error
    assert f_of_nu(ellipse, _dir(t)) == pytest.approx(_ellipse_ray(t), abs=1e-5)


def test_f_rejects_non_unit(ellipse):
    with pytest.raises(GeometryError):
        f_of_nu(ellipse, [1.0, 1.0])
    with pytest.raises(GeometryError):
        check_direction([0.6, 0.8001])


@given(angles)
def test_f_point_lies_on_boundary(t):
    dom = StarDomain.ellipse(2.0, 1.0)
    # interpolation bound |f''| dtheta^2 / 8 with |f''| <= 6 on this ellipse
    assert f_of_nu(dom, _dir(t)) == pytest.approx(_ellipse_ray(t), abs=6 * (2 * np.pi / 720) ** 2 / 8)


def test_f_refinement_second_order():
    t = 0.3 + 2 * np.pi / 720 * 0.5      # between table nodes
    errs = [abs(f_of_nu(StarDomain.ellipse(2, 1, samples=m), _dir(t)) - _ellipse_ray(t))
            for m in (180, 360)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


# -- normal_at -----------------------------------------------------------------

def test_normal_ball(ball):
    assert np.allclose(normal_at(ball, [0.0, 1.0]), [0.0, 1.0], atol=1e-12)


def test_normal_ellipse_axis(ellipse):
    assert np.allclose(normal_at(ellipse, [1.0, 0.0]), [1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.2, 4.0, 5.5])
def test_normal_ellipse_matches_gradient_and_fd_tangent(ellipse, t):
    r = _ellipse_ray(t)
    x = r * _dir(t)
    expected = np.array([x[0] / 4.0, x[1]])
    expected /= np.linalg.norm(expected)
    k = 1e-6       # central difference of the boundary parametrisation
    tan = _ellipse_ray(t + k) * _dir(t + k) - _ellipse_ray(t - k) * _dir(t - k)
    fd = np.array([tan[1], -tan[0]]) / np.linalg.norm(tan)
    n = normal_at(ellipse, _dir(t))
    assert np.allclose(fd, expected, atol=1e-8)
    assert np.allclose(n, expected, atol=2e-3)
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)


@given(angles)
def test_normal_star_shape_bound(t):
    dom = StarDomain.ellipse(2.0, 1.0)
    nu = _dir(t)
    assert normal_at(dom, nu) @ nu >= dom.delta - 1e-12


# -- gauge ---------------------------------------------------------------------

def test_gauge_ball_values(ball):
    g = Gauge(ball)
    assert gauge_eta(g, [0.5, 0.0]) == 0.0
    assert gauge_eta(g, [0.0, 1.3]) == pytest.approx(0.3, abs=1e-14)


def test_gauge_ellipse_distance_oracle(ellipse):
    g = Gauge(ellipse)
    assert gauge_eta(g, [3.0, 0.0]) == pytest.approx(1.0, abs=1e-9)
    p = np.array([1.5, 1.5])
    oracle = minimize_scalar(lambda s: np.hypot(p[0] - 2 * math.cos(s), p[1] - math.sin(s)),
                             bounds=(0, math.pi / 2), method="bounded",
                             options={"xatol": 1e-12}).fun
    assert gauge_eta(g, p) == pytest.approx(oracle, abs=1e-4)


vec = st.tuples(st.floats(-4, 4), st.floats(-4, 4)).map(np.array)


@given(vec, vec)
def test_gauge_convex_midpoint(p, q):
    g = Gauge(StarDomain.ellipse(2.0, 1.0))
    assert g((p + q) / 2) <= (g(p) + g(q)) / 2 + 1e-12


@given(vec)
def test_gauge_zero_iff_inside(p):
    dom = StarDomain.ellipse(2.0, 1.0)
    g = Gauge(dom)
    r = np.linalg.norm(p)
    if r < 1e-9:
        return
    # one angular cell of tolerance around the boundary
    band = 2 * dom.f_max * (1 - math.cos(np.pi / dom.samples)) + 1e-9
    if dom.contains(p, tol=-band):
        assert g(p) == 0.0
    if not dom.contains(p, tol=band):
        assert g(p) > 0.0


@given(vec, vec)
def test_gauge_lipschitz(p, q):
    g = Gauge(StarDomain.ellipse(2.0, 1.0))
    assert abs(g(p) - g(q)) <= np.linalg.norm(p - q) + 1e-12


def test_gauge_nonconvex_domain_flags_hull():
    dom = StarDomain.from_function(lambda t: 1.0 + 0.3 * math.cos(4 * t), samples=720)
    assert Gauge(dom).convexified
    assert not Gauge(StarDomain.ellipse(2, 1)).convexified


# -- validation ----------------------------------------------------------------

def test_validate_ball(ball):
    assert validate_star_shape(ball).delta_measured == pytest.approx(1.0, abs=1e-12)


def test_validate_ellipse_dense_cross_check(ellipse):
    rep = validate_star_shape(ellipse)
    dense = StarDomain.ellipse(2.0, 1.0, samples=7200)
    # the measured delta is min(f, 1/f, omega.nu); 1/f_max = 1/2 binds here
    assert rep.delta_measured == pytest.approx(0.5, abs=1e-12)
    assert rep.min_omega_dot_nu == pytest.approx(dense.omega_dot_nu().min(), abs=1e-4)
    t = np.linspace(0, 2 * np.pi, 100001)
    x, y = 2 * np.cos(t), np.sin(t)
    nx, ny = x / 4, y
    exact = np.min((x * nx + y * ny) / np.hypot(x, y) / np.hypot(nx, ny))
    assert rep.min_omega_dot_nu == pytest.approx(exact, abs=1e-4)


def test_validate_rejects_notch():
    def notch(t):
        return 1.0 - 0.8 * math.exp(-((math.atan2(math.sin(t), math.cos(t))) / 0.05) ** 2)
    dom = StarDomain.from_function(notch, samples=2048, delta=0.1)
    with pytest.raises(StarShapeError) as exc:
        validate_star_shape(dom)
    assert exc.value.worst_nu.shape == (2,)


def test_validate_rejects_coarse_table():
    with pytest.raises(GeometryError):
        StarDomain.ball(1.0, samples=8)


def test_interval_1d():
    dom = StarDomain.interval(2.0, 0.5)
    assert f_of_nu(dom, [1.0]) == 2.0 and f_of_nu(dom, [-1.0]) == 0.5
    g = Gauge(dom)
    assert g([3.0]) == pytest.approx(1.0) and g([-1.0]) == pytest.approx(0.5)


# -- text table ------------------------------------------------------------------

def test_table_roundtrip(tmp_path, ellipse):
    p = tmp_path / "d.txt"
    write_star_table(ellipse, p)
    back = read_star_table(p)
    assert np.allclose(back.radial, ellipse.radial, atol=1e-15)


@pytest.mark.parametrize("text", [
    "0.0 1.0\n0.2 1.0\n0.1 1.0\n",          # non-monotone
    "0.0 1.0\n7.0 1.0\n",                    # angle out of range
    "0.0 -1.0\n1.0 1.0\n",                   # negative radius
    "0.0 1.0 2.0\n",                         # wrong column count
])
def test_table_rejects_bad_input(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(GeometryError):
        read_star_table(p)


@given(st.floats(0.5, 1.5), st.floats(0.5, 1.5))
def test_ellipse_invariants(a, b):
    dom = StarDomain.ellipse(a, b)
    rep = validate_star_shape(dom)
    assert dom.delta <= dom.f_min and dom.f_max <= 1 / dom.delta
    assert rep.min_omega_dot_nu >= dom.delta - 1e-12
