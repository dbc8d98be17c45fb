import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles.acrit_scan import euclid_acrit_scan, hyp_waist_integrals
from oracles.rk4 import half_separation
from thetalam.geom import ALPHA0, DomainError, MetricProfile, cone_angle, lambda_weight
from thetalam.rotmin import (
    catenoid_area,
    catenoid_ode_residual,
    classify_Ma,
    clipped_area,
    count_crossings,
    delta_clipped,
    delta_limit,
    disk_pair_area,
    euclid_catenoids,
    find_a_crit,
    geodesics_cross_at_most_once,
    hyp_catenoid,
    hyp_catenoid_waists,
    hyp_catenoids,
    hyp_disk_pair,
    hyp_geodesic,
    profile_residual,
    ribbon_length,
    separation,
    theta_of_lambda,
)

EUC = MetricProfile.euclidean()
HYP = MetricProfile.poincare()

# dense-scan oracle values (tests/oracles/acrit_scan.py, 10^4 points each)
EUCLID_ACRIT_SCAN = 0.4667030168961153
HYP_ACRIT_SCAN = 0.412356693111933


def test_disk_pair_area_examples():
    assert disk_pair_area(0.5) == pytest.approx(1.5 * math.pi, rel=1e-15)
    assert disk_pair_area(0.2) == pytest.approx(1.92 * math.pi, rel=1e-15)
    assert disk_pair_area(1 - 1e-9) < 1e-7
    for bad in (0.0, 1.0, -0.3):
        with pytest.raises(DomainError):
            disk_pair_area(bad)
    with pytest.raises(DomainError):
        disk_pair_area(0.3, HYP)


def _sign_scan(a):
    cs = np.linspace(1e-4, 1.0, 200_001)
    f = cs * np.cosh(np.minimum(a / cs, 700.0)) - math.sqrt(1 - a * a)
    return int(np.count_nonzero(np.sign(f[:-1]) != np.sign(f[1:])))


@pytest.mark.parametrize("a", [0.05, 0.2, 0.4, 0.5, 0.52, 0.6, 0.9, 0.999])
def test_catenoid_count_matches_sign_scan(a):
    assert len(euclid_catenoids(a)) == _sign_scan(a)


def test_catenoids_at_a_02():
    cats = euclid_catenoids(0.2)
    assert len(cats) == 2
    c1, c2 = sorted(s.params["c"] for s in cats)
    assert c1 < c2
    for s in cats:
        c = s.params["c"]
        assert s.area == pytest.approx(catenoid_area(c, 0.2), rel=1e-12)
        assert np.max(np.abs(catenoid_ode_residual(s))) <= 1e-8
        # endpoints on c(a)
        r, z = s.profile[[0, -1]].T
        assert np.allclose(r**2 + z**2, 1.0, atol=1e-10)
        assert np.allclose(np.abs(z), 0.2, atol=1e-12)
        # reflection symmetry
        assert np.allclose(s.profile[::-1, 0], s.profile[:, 0], atol=1e-14)
        # spline-based residual, relative to the waist curvature 1/c
        assert np.max(np.abs(profile_residual(s.profile[:, 0], s.profile[:, 1], EUC))) * c < 1e-3
    assert cats[0].area < cats[1].area
    assert euclid_catenoids(0.999) == []


def test_hyp_geodesic_first_integral_and_series():
    for c in (0.5, 3.0, 40.0):
        sol = hyp_geodesic(c, 0.3)
        assert np.max(np.abs(sol.first_integral_residual())) <= 1e-8
        th = 1e-3
        assert sol.slope_at(th) / th**2 == pytest.approx(c / (2 * math.pi), rel=1e-2)
        ths = np.geomspace(1e-3, 1e-1, 30)
        ratio = (sol.t_at(ths) - sol.t_ideal) / ths**3
        assert np.all(np.isfinite(ratio)) and ratio.max() < 2 * ratio.min()


def test_hyp_geodesic_totally_geodesic_and_errors():
    sol = hyp_geodesic(0.0, 0.7)
    assert np.all(sol.t == 0.7)
    with pytest.raises(DomainError):
        hyp_geodesic(3.0, 0.0, theta_max=1.5)
    neg = hyp_geodesic(-3.0, 0.0)
    pos = hyp_geodesic(3.0, 0.0)
    assert np.allclose(neg.t, -pos.t)


def test_theta_of_lambda_inverts_lambda():
    for th in (1e-3, 0.3, ALPHA0, 1.5):
        assert theta_of_lambda(lambda_weight(th)) == pytest.approx(th, rel=1e-12)


def test_hyp_catenoid_properties():
    cat = hyp_catenoid(0.5, waist_t=0.25)
    up, down = cat.branches
    th = np.linspace(0.01, up.theta_max, 50)
    assert np.allclose(up.t_at(th) + down.t_at(th), 0.5, atol=1e-12)
    sep = up.t_ideal - down.t_ideal
    assert sep == pytest.approx(2 * half_separation(0.5, 5e-4), abs=1e-6)
    assert 2 * half_separation(0.5, 1e-3) == pytest.approx(2 * half_separation(0.5, 5e-4), abs=1e-6)
    # independent Gauss-Legendre value of the same integral
    assert sep == pytest.approx(2 * hyp_waist_integrals(0.5)[0], abs=1e-8)
    with pytest.raises(DomainError):
        hyp_catenoid(math.pi / 2)


def test_waist_at_alpha0_has_flat_strip_curvature():
    from thetalam.geom import strip_curvature

    cat = hyp_catenoid(ALPHA0)
    assert strip_curvature(cat.params["theta_waist"]) == pytest.approx(0.0, abs=1e-12)


def test_ribbon_length():
    c = 5.0
    cat = hyp_geodesic(c, 0.0)
    flat = hyp_geodesic(0.0, 0.0)
    ths = np.geomspace(1e-3, 1e-1, 40)
    rib = ribbon_length(cat, flat, ths)
    assert np.all(ribbon_length(cat, cat, ths) == 0)
    assert rib[0] < rib[-1] and rib[0] < 1e-2
    # linear fit through the origin
    k = np.sum(rib * ths) / np.sum(ths * ths)
    assert np.max(np.abs(rib - k * ths) / rib) <= 0.05
    assert k == pytest.approx(c / 3, rel=0.02)
    with pytest.raises(DomainError):
        ribbon_length(cat, hyp_geodesic(0.0, 1.0), 0.1)


def test_clipped_area_behaviour():
    cat = hyp_catenoid(0.6)
    disks = hyp_disk_pair(math.tanh(cat.branches[0].t_ideal))
    # cylinder thinner than the waist misses the catenoid
    s_waist = -math.log(math.tan(cat.params["theta_waist"] / 2))
    assert clipped_area(cat, 0.5 * s_waist) == 0.0
    ss = np.linspace(0.2, 6, 25)
    for surf in (cat, disks):
        vals = [clipped_area(surf, s) for s in ss]
        assert np.all(np.diff(vals) >= -1e-9)
        hv = [clipped_area(surf, 4.0, h) for h in (0.05, 0.2, 1.0, math.inf)]
        assert np.all(np.diff(hv) >= -1e-9)
    for s in (1.0, 3.0, 5.0):
        direct = clipped_area(cat, s) - clipped_area(disks, s)
        assert direct == pytest.approx(delta_clipped(0.6, s), abs=1e-8)
    with pytest.raises(DomainError):
        clipped_area(cat, 0.0)


def test_delta_limit_is_cauchy():
    val, s_star = delta_limit(0.6)
    for k in range(1, 6):
        assert abs(delta_clipped(0.6, s_star + 0.5 * k) - val) <= 2e-6
    assert val == pytest.approx(hyp_waist_integrals(0.6)[1], abs=1e-5)


def test_classification_euclidean():
    assert classify_Ma(0.95).verdict == "DisksOnly"
    assert classify_Ma(0.05).verdict == "AnnuliOnly"
    res = find_a_crit(EUC)
    assert res.bracket[1] - res.bracket[0] <= 1e-8
    assert res.a_crit == pytest.approx(EUCLID_ACRIT_SCAN, abs=1e-6)
    assert classify_Ma(res.a_crit).verdict == "Both"
    assert classify_Ma(res.bracket[0] - 1e-6).verdict == "AnnuliOnly"
    assert classify_Ma(res.bracket[1] + 1e-6).verdict == "DisksOnly"


def test_euclid_scan_oracle_is_live():
    assert euclid_acrit_scan() == pytest.approx(EUCLID_ACRIT_SCAN, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.02, 0.98))
def test_euclid_monotone_verdict(a):
    v = classify_Ma(a).verdict
    if a < EUCLID_ACRIT_SCAN - 1e-6:
        assert v == "AnnuliOnly"
    elif a > EUCLID_ACRIT_SCAN + 1e-6:
        assert v == "DisksOnly"


def test_minimizers_are_symmetric():
    for a in (0.2, 0.8):
        for m in classify_Ma(a).minimizers:
            z = m.profile[:, 1]
            if m.kind == "Catenoid":
                assert np.allclose(z, -z[::-1], atol=1e-14)


@pytest.mark.slow
def test_classification_hyperbolic():
    res = find_a_crit(HYP)
    assert res.a_crit == pytest.approx(HYP_ACRIT_SCAN, abs=1e-4)
    lo = classify_Ma(res.a_crit / 2, HYP)
    hi = classify_Ma((1 + res.a_crit) / 2, HYP)
    assert (lo.verdict, hi.verdict) == ("AnnuliOnly", "DisksOnly")
    assert classify_Ma(res.a_crit, HYP).verdict == "Both"
    cat = lo.minimizers[0]
    up, down = cat.branches
    assert up.t_ideal == pytest.approx(-down.t_ideal, abs=1e-12)
    assert up.t_ideal == pytest.approx(math.atanh(res.a_crit / 2), abs=1e-10)


def test_hyperbolic_catenoid_multiplicity():
    # two symmetric catenoids below the fold, none above; only one can minimize
    assert len(hyp_catenoid_waists(0.3)) == 2
    assert hyp_catenoid_waists(0.47) == []
    cats = hyp_catenoids(0.3)
    assert cats[0].params["delta"] < cats[1].params["delta"]


def test_crossings():
    g1, g2 = hyp_geodesic(0.0, 0.1), hyp_geodesic(0.0, 0.4)
    assert count_crossings(g1, g2) == 0 and geodesics_cross_at_most_once(g1, g2)
    cat = hyp_catenoid(0.7)
    # the totally geodesic plane through the waist circle meets the catenoid once there
    waist_plane = hyp_geodesic(0.0, 0.0)
    assert count_crossings(cat, waist_plane, region=(0.0, 0.7)) <= 1
    with pytest.raises(DomainError):
        count_crossings(hyp_geodesic(40.0, 0.0), hyp_geodesic(40.0, 0.1), region=(1.2, 1.4))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, ALPHA0 - 0.02), st.floats(0.1, ALPHA0 - 0.02), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_catenoids_in_negative_curvature_region_cross_at_most_once(w1, w2, t1, t2):
    c1 = hyp_catenoid(w1, t1)
    c2 = hyp_catenoid(w2, t2)
    if abs(w1 - w2) < 1e-6 and abs(t1 - t2) < 1e-6:
        return
    assert geodesics_cross_at_most_once(c1, c2)
