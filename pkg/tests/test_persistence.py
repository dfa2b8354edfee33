import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulerslip.construct import BetaSpec, admissible_from_beta, make_beta, named_ball_field, rigid_rotation, slab_stream_field
from eulerslip.curvcalc import to_frame
from eulerslip.geometry import GeometryError, slab, sphere, spheroid, surface_frame, torus
from eulerslip.persistence import (
    PreconditionError,
    Tolerances,
    criterion_scan,
    default_workers,
    evaluate_samples,
    find_witnesses,
    identity_lhs,
    identity_rhs,
    navier_stress_gap,
    persistence_rate,
    proof_step_residuals,
    proposition_witness,
    surface_curl_b3,
    verify_identity,
)

N = 2000


@pytest.fixture(scope="module")
def ball():
    return named_ball_field(samples=N)


@pytest.fixture(scope="module")
def spheroid_field():
    chart = spheroid(1.0, 2.0)
    return admissible_from_beta(chart, make_beta(BetaSpec("legendre", (0.3, 0.0, 1.0)), chart), samples=N)


@pytest.fixture(scope="module")
def torus_field():
    chart = torus(3.0, 1.0)
    spec = BetaSpec("bump", bumps=((math.pi / 2, 0.6, 1.0), (3 * math.pi / 2, 0.6, -1.0)))
    return admissible_from_beta(chart, make_beta(spec, chart), samples=N)


def test_lhs_matches_jacobian_oracle(spheroid_field):
    # curl(a x b) = (b.grad) a - (a.grad) b when both fields are solenoidal
    f = spheroid_field
    fr = surface_frame(f.chart, *f.chart.sample(100, seed=4))
    x = fr.position
    Ja, Jb = f.a.jacobian(x), f.b.jacobian(x)
    curl = np.einsum("nij,nj->ni", Ja, f.b(x)) - np.einsum("nij,nj->ni", Jb, f.a(x))
    np.testing.assert_allclose(identity_lhs(f, fr), np.cross(curl, fr.n), atol=1e-11)
    np.testing.assert_array_equal(persistence_rate(f, fr), identity_lhs(f, fr))


def test_ball_rate_closed_form(ball):
    fr = surface_frame(ball.chart, *ball.chart.sample(500, seed=5))
    theta = fr.xi1
    expected = -2.0 * np.sin(2 * theta)[:, None] * fr.i1
    np.testing.assert_allclose(identity_lhs(ball, fr), expected, atol=1e-13)
    a = to_frame(ball.a(fr.position), fr)
    np.testing.assert_allclose(identity_rhs(a, 2 * np.cos(theta), fr), expected, atol=1e-13)


@pytest.mark.parametrize("name", ["ball", "spheroid_field", "torus_field"])
def test_identity_holds(name, request):
    f = request.getfixturevalue(name)
    report = verify_identity(f, samples=3000, seed=1)
    assert report.passed()
    assert report.max_deviation <= 1e-9
    assert report.verdict == "persistence_fails"


def test_sphere_flags_and_slab_control(ball):
    report = criterion_scan(ball, samples=3000, seed=2)
    assert report.fraction_criterion >= 0.9
    theta = report.frame.xi1
    off = ~report.criterion_holds
    near = np.min(np.abs(theta[off, None] - np.array([0, math.pi / 2, math.pi])), axis=1)
    assert np.all(near <= 0.05)
    assert np.all(report.in_sigma)
    s = criterion_scan(slab_stream_field(slab(), samples=N), samples=1000)
    assert s.verdict == "inconclusive" and s.max_lhs <= 1e-8
    assert not np.any(s.in_sigma)
    assert s.summary()["certified_samples"] == 0


def test_torus_sigma_matches_closed_form_gaussian(torus_field):
    report = criterion_scan(torus_field, samples=2000)
    t = report.frame.xi1
    gauss = np.sin(t) / (1.0 * (3.0 + np.sin(t)))
    np.testing.assert_array_equal(report.in_sigma, np.abs(gauss) > 1e-8)
    np.testing.assert_allclose(report.frame.gaussian, gauss, atol=1e-13)


def test_precondition_rejects_non_admissible():
    with pytest.raises(PreconditionError, match="not admissible"):
        criterion_scan(rigid_rotation(samples=200), samples=10)


def test_sample_record_and_summary(ball):
    r = criterion_scan(ball, samples=50, seed=3)
    s = r.sample(7)
    assert s.deviation == r.deviation[7]
    assert s.in_k == bool(r.in_k[7])
    assert len(r) == 50
    summ = r.summary()
    assert summ["samples"] == 50 and summ["verdict"] == r.verdict
    assert r.provenance["seed"] == 3


@settings(max_examples=15)
@given(st.sampled_from([2.0, -1.0, 10.0, 0.3, -7.5]))
def test_bilinearity(ball, c):
    fr = surface_frame(ball.chart, *ball.chart.sample(200, seed=6))
    g = ball.scaled(c)
    lhs, lhs_c = identity_lhs(ball, fr), identity_lhs(g, fr)
    np.testing.assert_allclose(lhs_c, c * c * lhs, rtol=1e-10, atol=1e-14)
    a = to_frame(g.a(fr.position), fr)
    b3 = np.sum(g.b(fr.position) * fr.n, -1)
    np.testing.assert_allclose(identity_rhs(a, b3, fr), c * c * identity_lhs(ball, fr), rtol=1e-10, atol=1e-13)


def test_threads_do_not_change_results(spheroid_field):
    u, v = spheroid_field.chart.sample(1500, seed=9)
    one = evaluate_samples(spheroid_field, spheroid_field.chart, u, v, workers=1)
    many = evaluate_samples(spheroid_field, spheroid_field.chart, u, v, workers=4)
    np.testing.assert_array_equal(one[3], many[3])
    np.testing.assert_array_equal(one[4], many[4])


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("EULERSLIP_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("EULERSLIP_THREADS", "zero")
    assert default_workers() == 1


@pytest.mark.parametrize("bad", [{"identity": 0.0}, {"lam": -1.0}, {"margin_factor": 0}])
def test_tolerances_must_be_positive(bad):
    with pytest.raises(ValueError):
        Tolerances(**bad)


def test_surface_curl_second_order(ball):
    theta = np.linspace(0.3, math.pi - 0.3, 7)
    phi = np.linspace(0, 6, 7)
    errs = []
    steps = 0.02 / 2.0 ** np.arange(4)
    for h in steps:
        formula, exact = surface_curl_b3(ball, ball.chart, theta, phi, h)
        errs.append(np.max(np.abs(formula - exact)))
    np.testing.assert_allclose(exact, 2 * np.cos(theta), atol=1e-13)
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


@pytest.mark.parametrize("name", ["ball", "spheroid_field", "torus_field"])
def test_proof_steps(name, request):
    f = request.getfixturevalue(name)
    u, v = f.chart.sample(100, seed=10)
    res = proof_step_residuals(f, f.chart, u, v)
    assert set(res) >= {"a3", "b1", "b2", "normal_a1", "normal_a2", "normal_b3", "curl_ab_1", "curl_ab_2"}
    for key, r in res.items():
        assert np.max(r) <= 1e-7, key


def test_witnesses_near_nonzero_vorticity(spheroid_field):
    f = spheroid_field
    u, v = f.chart.sample(300, seed=11)
    b3 = np.sum(f.b(surface_frame(f.chart, u, v).position) * surface_frame(f.chart, u, v).n, -1)
    keep = np.abs(b3) > 1e-6
    radius = 1e-2 * f.chart.diameter
    found, j, aj, dist, pos = find_witnesses(f, f.chart, u[keep], v[keep], radius)
    assert found.all()
    assert np.all(dist <= radius) and np.all(np.abs(aj) > 1e-9)
    assert set(np.unique(j)) <= {1, 2}


def test_proposition_witness_at_the_pole_region(ball):
    # a vanishes on the axis; the witness sits off the point itself
    w = proposition_witness(ball, ball.chart, 2e-3, 0.0, radii=[1e-2, 1e-3])
    assert w.found_all
    assert w.b3 == pytest.approx(2 * math.cos(2e-3), abs=1e-12)
    for radius, pos, j, aj in w.witnesses:
        assert np.linalg.norm(pos - w.x0) <= radius and abs(aj) > 1e-9
    with pytest.raises(PreconditionError):
        proposition_witness(ball, ball.chart, math.pi / 2, 0.0, radii=[1e-2])


def test_navier_gap_matches_stress_tensor(spheroid_field):
    f = spheroid_field
    fr = surface_frame(f.chart, *f.chart.sample(200, seed=12))
    rng = np.random.default_rng(0)
    ang = rng.uniform(0, 2 * math.pi, len(fr))
    tau = np.cos(ang)[:, None] * fr.i1 + np.sin(ang)[:, None] * fr.i2
    nu = 0.37
    J = f.a.jacobian(fr.position)
    strain = 0.5 * nu * (J + np.swapaxes(J, -1, -2))
    stress = np.einsum("nij,nj,ni->n", strain, fr.n, tau)
    slip, curvature = navier_stress_gap(f, fr, tau, nu)
    np.testing.assert_allclose(slip, 0.0, atol=1e-12)
    np.testing.assert_allclose(stress, slip - curvature, atol=1e-12)
    assert np.max(np.abs(curvature)) > 1e-2


def test_navier_gap_for_rigid_rotation():
    f = rigid_rotation(samples=100)
    fr = surface_frame(f.chart, *f.chart.sample(50))
    slip, curvature = navier_stress_gap(f, fr, fr.i2)
    np.testing.assert_allclose(slip, curvature, atol=1e-13)
    with pytest.raises(GeometryError):
        navier_stress_gap(f, fr, fr.n)
    with pytest.raises(GeometryError):
        navier_stress_gap(f, fr, 2 * fr.i1)
