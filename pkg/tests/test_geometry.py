import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from eulerslip.geometry import (
    ChartDomainError,
    FocalPointError,
    GeometryError,
    PointClass,
    classify_point,
    curvatures_via_kapa,
    cylinder,
    parallel_point,
    revolution,
    sigma_membership,
    slab,
    sphere,
    spheroid,
    surface_frame,
    torus,
)

CHARTS = {
    "sphere": lambda: sphere(1.3),
    "spheroid": lambda: spheroid(1.0, 2.0),
    "oblate": lambda: spheroid(2.0, 0.7),
    "torus": lambda: torus(3.0, 1.0),
    "cylinder": lambda: cylinder(0.8, 5.0),
}


def fd_curvatures(chart, u, v, h=1e-4):
    """Second fundamental form from central differences of the embedding alone."""

    def X(a, b):
        return np.stack([np.asarray(c, float) for c in chart.embed(np.asarray(a, float), np.asarray(b, float))], -1)

    Xu = (X(u + h, v) - X(u - h, v)) / (2 * h)
    Xv = (X(u, v + h) - X(u, v - h)) / (2 * h)
    Xuu = (X(u + h, v) - 2 * X(u, v) + X(u - h, v)) / h**2
    Xvv = (X(u, v + h) - 2 * X(u, v) + X(u, v - h)) / h**2
    return Xu, Xv, Xuu, Xvv


@pytest.mark.parametrize("name", sorted(CHARTS))
def test_curvatures_match_finite_difference_oracle(name):
    chart = CHARTS[name]()
    u, v = chart.sample(50, seed=7)
    fr = surface_frame(chart, u, v)
    Xu, Xv, Xuu, Xvv = fd_curvatures(chart, u, v)
    n = fr.n
    k1 = -np.sum(Xuu * n, -1) / np.sum(Xu * Xu, -1)
    k2 = -np.sum(Xvv * n, -1) / np.sum(Xv * Xv, -1)
    np.testing.assert_allclose(fr.kappa1, k1, atol=1e-6)
    np.testing.assert_allclose(fr.kappa2, k2, atol=1e-6)
    # the frame is orthonormal and right-handed, and i1, i2 are the coordinate directions
    np.testing.assert_allclose(np.cross(fr.i1, fr.i2), n, atol=1e-13)
    np.testing.assert_allclose(np.abs(np.sum(fr.i1 * Xu, -1)), np.linalg.norm(Xu, axis=-1), rtol=1e-7)
    np.testing.assert_allclose(fr.h1, np.linalg.norm(Xu, axis=-1), rtol=1e-7)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_sphere_is_umbilic_with_outward_normal(R):
    chart = sphere(R)
    u, v = chart.sample(200, seed=1)
    fr = surface_frame(chart, u, v)
    np.testing.assert_allclose(fr.kappa1, 1 / R, atol=1e-12)
    np.testing.assert_allclose(fr.kappa2, 1 / R, atol=1e-12)
    np.testing.assert_allclose(fr.n, fr.position / R, atol=1e-13)
    assert np.all(classify_point(fr, scale=R) == PointClass.UMBILICAL.value)


def spheroid_closed_form(a, c, t):
    s = np.sqrt(a * a * np.cos(t) ** 2 + c * c * np.sin(t) ** 2)
    return a * c / s**3, c / (a * s)


@pytest.mark.parametrize("a, c", [(1.0, 2.0), (2.0, 0.7), (1.5, 1.5)])
def test_spheroid_closed_form(a, c):
    chart = spheroid(a, c)
    u, v = chart.sample(300, seed=2)
    fr = surface_frame(chart, u, v)
    t = np.arccos(np.clip(fr.position[:, 2] / c, -1, 1))
    k1, k2 = spheroid_closed_form(a, c, t)
    np.testing.assert_allclose(fr.kappa1, k1, rtol=1e-11)
    np.testing.assert_allclose(fr.kappa2, k2, rtol=1e-11)


def test_spheroid_equator_values():
    fr = surface_frame(spheroid(1.0, 2.0), math.pi / 2, 0.0)
    assert fr.kappa1 == pytest.approx(0.25, abs=1e-14)
    assert fr.kappa2 == pytest.approx(1.0, abs=1e-14)


def test_torus_outer_equator_and_gaussian_zero_circles():
    chart = torus(3.0, 1.0)
    fr = surface_frame(chart, math.pi / 2, 0.3)
    assert (fr.kappa1, fr.kappa2) == pytest.approx((1.0, 0.25), abs=1e-14)
    np.testing.assert_allclose(fr.n, [math.cos(0.3), math.sin(0.3), 0.0], atol=1e-14)

    def gauss(t):
        return float(surface_frame(chart, t, 0.0).gaussian)

    assert brentq(gauss, math.pi - 0.5, math.pi + 0.5, xtol=1e-14) == pytest.approx(math.pi, abs=1e-10)
    assert gauss(0.1) * gauss(2 * math.pi - 0.1) < 0
    assert not sigma_membership(surface_frame(chart, 0.0, 1.0))
    assert sigma_membership(surface_frame(chart, 1.0, 1.0))


@pytest.mark.parametrize("name", ["spheroid", "oblate", "torus", "cylinder"])
def test_two_curvature_routes_agree(name):
    chart = CHARTS[name]()
    u, v = chart.sample(1000, seed=3)
    fr = surface_frame(chart, u, v)
    k1, k2 = curvatures_via_kapa(chart, u, v)
    np.testing.assert_allclose(k1, fr.kappa1, atol=1e-10)
    np.testing.assert_allclose(k2, fr.kappa2, atol=1e-10)


@pytest.mark.parametrize("name", sorted(CHARTS))
@given(frac=st.floats(0.0, 0.9), which=st.integers(0, 49))
def test_parallel_scale_law(name, frac, which):
    chart = CHARTS[name]()
    u, v = chart.sample(50, seed=4)
    u, v = u[which], v[which]
    s = -frac * chart.reach
    fr = surface_frame(chart, u, v)
    pos, h1, h2 = parallel_point(chart, u, v, s)
    assert h1 == pytest.approx(fr.h1 * (1 + fr.kappa1 * s), rel=1e-12, abs=1e-14)
    assert h2 == pytest.approx(fr.h2 * (1 + fr.kappa2 * s), rel=1e-12, abs=1e-14)
    np.testing.assert_allclose(pos, fr.position + s * fr.n, atol=1e-14)


def test_parallel_point_sphere_and_focal_error():
    chart = sphere(1.0)
    _, h1, h2 = parallel_point(chart, 1.0, 0.0, -0.1)
    assert h1 == pytest.approx(0.9)
    assert h2 == pytest.approx(0.9 * math.sin(1.0))
    with pytest.raises(FocalPointError):
        parallel_point(chart, 1.0, 0.0, -1.0)


def test_slab_is_planar_with_infinite_focal_distance():
    chart = slab()
    fr = surface_frame(chart, *chart.sample(20))
    assert np.all(fr.kappa1 == 0) and np.all(fr.kappa2 == 0)
    np.testing.assert_array_equal(fr.n, np.tile([0.0, 0.0, 1.0], (20, 1)))
    assert math.isinf(chart.focal_distance)
    assert chart.reach == 1.0
    assert np.all(classify_point(fr) == PointClass.PLANAR.value)
    assert not np.any(sigma_membership(fr))


def test_expression_profile_orientation_is_normalized():
    # the same sphere traversed in both directions gets the outward normal
    for z in ("cos(t)", "-cos(t)"):
        chart = revolution("sin(t)", z, [0.0, math.pi])
        fr = surface_frame(chart, *chart.sample(30, seed=5))
        np.testing.assert_allclose(fr.kappa1, 1.0, atol=1e-12)
        np.testing.assert_allclose(fr.n, fr.position, atol=1e-12)


def test_torus_is_generic_away_from_special_circles():
    fr = surface_frame(torus(3.0, 1.0), 1.0, 0.0)
    assert classify_point(fr) is PointClass.GENERIC


def test_interior_samples_lie_in_domain():
    pts = sphere(2.0).interior_sample(500, seed=9)
    r = np.linalg.norm(pts, axis=-1)
    assert np.all(r <= 2.0 + 1e-12) and np.all(r >= 1.0 - 1e-12)
    tor = torus(3.0, 1.0).interior_sample(500, seed=9)
    d = np.hypot(np.hypot(tor[:, 0], tor[:, 1]) - 3.0, tor[:, 2])
    assert np.all(d <= 1.0 + 1e-12)


def test_sampling_is_reproducible_and_in_range():
    chart = sphere()
    a = chart.sample(100, seed=11)
    b = chart.sample(100, seed=11)
    np.testing.assert_array_equal(a[0], b[0])
    assert np.all((a[0] > 0) & (a[0] < math.pi))
    with pytest.raises(ValueError):
        chart.sample(0)


@pytest.mark.parametrize(
    "factory",
    [lambda: sphere(-1.0), lambda: torus(1.0, 2.0), lambda: spheroid(0.0, 1.0), lambda: cylinder(1.0, 0.0)],
)
def test_invalid_parameters(factory):
    with pytest.raises(GeometryError):
        factory()


def test_chart_domain_and_step_validation():
    chart = sphere()
    with pytest.raises(ChartDomainError):
        surface_frame(chart, 4.0, 0.0)
    with pytest.raises(ChartDomainError):
        curvatures_via_kapa(chart, 1.0, 0.0, delta=0.5)
    assert curvatures_via_kapa(chart, 1.0, 0.0, delta=0.01) == pytest.approx((1.0, 1.0))
