import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thetalam.geom import (
    ALPHA0,
    AXIS,
    OUTER,
    DomainError,
    HalfDiskGrid,
    MetricProfile,
    ball_to_strip,
    ball_to_uhs,
    cone_angle,
    cone_distance,
    lambda_weight,
    strip_coords,
    strip_curvature,
    strip_to_ball,
    uhs_to_ball,
)

# quadrature of 1/sin(theta) from alpha to pi/2 (scipy quad, epsrel 1e-13)
QUAD_CONE = {math.pi / 6: 1.316957896924817, 1e-3: 7.600902376208745, 1e-4: 9.903487551702794}


def test_cone_distance_examples():
    assert cone_distance(math.pi / 2) == pytest.approx(0.0, abs=1e-15)
    for a, v in QUAD_CONE.items():
        assert cone_distance(a) == pytest.approx(v, rel=1e-12)
    # s ~ log(2 / alpha) near the ideal boundary
    for a in (1e-3, 1e-4):
        assert cone_distance(a) - math.log(2 / a) == pytest.approx(0.0, abs=a)


def test_cone_distance_errors():
    for bad in (0.0, -0.1, 2.0):
        with pytest.raises(DomainError):
            cone_distance(bad)
    with pytest.raises(DomainError):
        cone_angle(-1.0)


@given(st.floats(1e-6, math.pi / 2))
def test_cone_angle_inverts_cone_distance(a):
    assert cone_angle(cone_distance(a)) == pytest.approx(a, abs=1e-12)


@given(st.floats(1e-4, 1.5), st.floats(1e-6, 0.05))
def test_cone_distance_strictly_decreasing(a, d):
    b = min(a + d, math.pi / 2)
    if b > a:
        assert cone_distance(a) > cone_distance(b)


def test_strip_coords_examples():
    p = strip_coords(0, 0, 1)
    assert (p.theta, p.t) == (pytest.approx(math.pi / 2), pytest.approx(0.0))
    p = strip_coords(1, 0, 1)
    assert p.theta == pytest.approx(math.pi / 4, abs=1e-15)
    assert p.t == pytest.approx(0.5 * math.log(2), abs=1e-15)
    p = strip_coords(0, 0, math.e)
    assert (p.theta, p.t) == (pytest.approx(math.pi / 2), pytest.approx(1.0))
    with pytest.raises(DomainError):
        strip_coords(1, 0, 0)


def test_lambda_examples():
    assert lambda_weight(math.pi / 2) == pytest.approx(0.0, abs=1e-15)
    assert lambda_weight(math.pi / 4) == pytest.approx(2 * math.sqrt(2) * math.pi, rel=1e-14)
    # lambda theta^2 = 2 pi (1 - theta^2 / 6 + ...)
    t = 1e-3
    assert lambda_weight(t) * t * t == pytest.approx(2 * math.pi * (1 - t * t / 6), rel=1e-12)
    with pytest.raises(DomainError):
        lambda_weight(0.0)


@given(st.lists(st.floats(1e-4, math.pi / 2), min_size=2, max_size=2, unique=True))
def test_lambda_strictly_decreasing(ts):
    t1, t2 = sorted(ts)
    if t2 - t1 > 1e-12:
        assert lambda_weight(t1) > lambda_weight(t2)


def test_strip_curvature_examples():
    assert strip_curvature(ALPHA0) == pytest.approx(0.0, abs=1e-14)
    assert strip_curvature(math.pi / 4) == pytest.approx(-1 / (4 * math.pi**2), rel=1e-12)
    assert strip_curvature(1.2) > 0
    assert strip_curvature(ALPHA0 - 1e-3) < 0 < strip_curvature(ALPHA0 + 1e-3)
    with pytest.raises(DomainError):
        strip_curvature(math.pi / 2)


def _fd_curvature(theta, h):
    ll = lambda x: math.log(lambda_weight(x))
    d2 = (ll(theta + h) - 2 * ll(theta) + ll(theta - h)) / h**2
    return -d2 / lambda_weight(theta) ** 2


@pytest.mark.parametrize("theta", [0.3, 0.7, 1.2])
def test_strip_curvature_matches_conformal_formula(theta):
    errs = [abs(_fd_curvature(theta, h) - strip_curvature(theta)) for h in (2e-2, 1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_metric_symmetry_and_positivity():
    rng = np.random.default_rng(0)
    r = rng.uniform(0, 0.7, 500)
    z = rng.uniform(-0.7, 0.7, 500)
    for m in (MetricProfile.euclidean(), MetricProfile.poincare()):
        f = m.conformal_factor(r, z)
        assert np.all(f > 0)
        assert np.array_equal(f, m.conformal_factor(r, -z))
    with pytest.raises(DomainError):
        MetricProfile("sphere")


def test_ball_uhs_round_trip_and_heights():
    rng = np.random.default_rng(1)
    rho = rng.uniform(0, 0.95, 200)
    ang = rng.uniform(-math.pi / 2, math.pi / 2, 200)
    r, z = rho * np.cos(ang), rho * np.sin(ang)
    x, y = ball_to_uhs(r, z)
    r2, z2 = uhs_to_ball(x, y)
    assert np.allclose(r2, r, atol=1e-12) and np.allclose(z2, z, atol=1e-12)
    th, t = ball_to_strip(r, z)
    r3, z3 = strip_to_ball(th, t)
    assert np.allclose(r3, r, atol=1e-11) and np.allclose(z3, z, atol=1e-11)
    # the sphere circle at height a goes to the ideal circle t = artanh(a); z -> -z is t -> -t
    for a in (0.1, 0.5, 0.9):
        x, y = ball_to_uhs(math.sqrt(1 - a * a), a)
        assert y == pytest.approx(0.0, abs=1e-15)
        assert math.log(x) == pytest.approx(math.atanh(a), abs=1e-14)
    assert np.allclose(ball_to_strip(r, -z)[1], -ball_to_strip(r, z)[1], atol=1e-12)


def test_ball_uhs_is_an_isometry():
    # Poincare ball line element against the half-space one on a short segment
    p = np.array([0.3, 0.2])
    d = np.array([1e-6, -2e-6])
    ds_ball = 2 * np.linalg.norm(d) / (1 - p @ p)
    x0, y0 = ball_to_uhs(*p)
    x1, y1 = ball_to_uhs(*(p + d))
    ds_uhs = math.hypot(x1 - x0, y1 - y0) / (0.5 * (y0 + y1))
    assert ds_uhs == pytest.approx(ds_ball, rel=1e-5)


@pytest.mark.parametrize("n", [16, 33, 64])
def test_grid_invariants(n, grids):
    g = grids(n)
    h = g.h
    assert np.all(g.r >= 0)
    assert np.all(g.r[g.tags == AXIS] == 0)
    rho2 = g.r**2 + g.z**2
    assert np.all(np.abs(rho2[g.tags == OUTER] - 1) <= h)
    assert np.all(g.area > 0.2 * h * h)
    assert g.area.sum() == pytest.approx(g.boundary_polygon_area(), rel=1e-13)
    # mirror symmetry of nodes and of the triangulation
    assert np.array_equal(g.nodes[g.mirror] * [1, -1], g.nodes)
    tri = {tuple(sorted(t)) for t in g.triangles.tolist()}
    assert {tuple(sorted(g.mirror[t])) for t in g.triangles.tolist()} == tri
    assert np.bincount(g.triangles.ravel(), minlength=g.n_nodes).min() > 0


def test_grid_exhaustion_radius(grids):
    g = grids(32, 0.99)
    rho = np.hypot(g.r, g.z)
    assert np.allclose(rho[g.outer], 0.99, atol=1e-14)
    assert rho.max() <= 0.99 + 1e-14
    with pytest.raises(DomainError):
        HalfDiskGrid.build(2)
