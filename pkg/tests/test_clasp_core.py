import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claspforge import clasp_core as cc

PAIRS = [("x_1", "x_2"), ("x_1", "u_1"), ("x_2", "u_2"), ("x_1", "u_2"), ("x_2", "u_1"), ("u_1", "u_2")]


def random_quads(n, lo=0.01, hi=0.99, seed=1):
    rng = np.random.default_rng(seed)
    return cc.transfer(u_1=rng.uniform(lo, hi, n), u_2=rng.uniform(lo, hi, n))


def test_transfer_symmetric_half():
    q = cc.transfer(u_1=0.5, u_2=0.5)
    assert q.x_1 == pytest.approx(1 / math.sqrt(5), abs=1e-15)
    assert q.x_2 == pytest.approx(1 / math.sqrt(5), abs=1e-15)


def test_transfer_endpoint_case():
    q = cc.transfer(u_1=1.0, u_2=0.0)
    assert (q.x_1, q.x_2) == (1.0, 0.0)


def test_transfer_round_trip_example():
    q = cc.transfer(x_1=0.3, u_1=0.6)
    back = cc.transfer(x_2=q.x_2, u_2=q.u_2)
    assert back.x_1 == pytest.approx(0.3, abs=1e-12)
    assert back.u_1 == pytest.approx(0.6, abs=1e-12)


@pytest.mark.parametrize("pair", PAIRS)
def test_round_trip_every_pair(pair):
    q = random_quads(100_000)
    full = {"x_1": q.x_1, "x_2": q.x_2, "u_1": q.u_1, "u_2": q.u_2}
    r = cc.transfer(**{k: full[k] for k in pair})
    for k in full:
        assert np.max(np.abs(getattr(r, k) - full[k])) < 1e-12, k


@pytest.mark.parametrize("lo,hi,tol", [(0.01, 0.99, 1e-12), (0.0, 1.0, 1e-10)])
def test_identities_and_ordering(lo, hi, tol):
    q = random_quads(100_000, lo, hi, seed=7)
    for xi, ui, xj, uj in ((q.x_1, q.u_1, q.x_2, q.u_2), (q.x_2, q.u_2, q.x_1, q.u_1)):
        assert np.max(np.abs(xi**2 - (1 - xj**2 / uj**2))) < tol
        assert np.max(np.abs(ui**2 - xi**2 / (1 - xj**2))) < tol
        assert np.all((0 <= xi) & (xi <= ui + 1e-15) & (ui <= 1))


def test_round_trip_full_square_is_looser():
    # near u = 0 or 1 the (x_1, x_2) branch is ill-conditioned
    q = random_quads(20_000, 0.0, 1.0, seed=3)
    r = cc.transfer(x_1=q.x_1, x_2=q.x_2)
    assert np.max(np.abs(r.u_1 - q.u_1)) < 1e-8


def test_unit_strut_geometry():
    q = random_quads(10_000, seed=5)
    c1, c2 = np.sqrt(1 - q.u_1**2), np.sqrt(1 - q.u_2**2)
    dz = q.x_1 * c1 / q.u_1  # strut normal to the first tangent
    length = np.sqrt(q.x_1**2 + q.x_2**2 + dz**2)
    assert np.max(np.abs(length - 1)) < 1e-10
    # normal to the second tangent (0, c2, -u2)
    assert np.max(np.abs(q.x_2 * c2 - q.u_2 * dz)) < 1e-10


def test_inconsistent_inputs():
    with pytest.raises(cc.InconsistentInputs):
        cc.transfer(x_1=0.9, u_1=0.5)
    with pytest.raises(cc.InconsistentInputs):
        cc.transfer(u_1=1.0, u_2=1.0)
    with pytest.raises(ValueError):
        cc.transfer(u_1=0.5)


@pytest.mark.parametrize("u1,t1,t2,expected", [(0.5, 1, 1, 0.5), (0.25, 0.5, 1, 0.5), (0.7, 0.7, 0.3, 0.0)])
def test_balance_partner(u1, t1, t2, expected):
    assert cc.balance_partner(u1, cc.ClaspParams(t1, t2)) == pytest.approx(expected, abs=1e-15)


def test_balance_partner_out_of_range():
    with pytest.raises(cc.OutOfRange):
        cc.balance_partner(0.6, cc.ClaspParams(0.5, 1.0))
    with pytest.raises(cc.OutOfRange):
        cc.balance_partner(-0.1, cc.ClaspParams(0.5, 1.0))


def test_weights_default_to_inverse_tau():
    p = cc.ClaspParams(0.4, 0.8)
    assert (p.w_1, p.w_2) == (1 / 0.4, 1 / 0.8)


def test_clasp_x_values():
    p = cc.ClaspParams(1.0, 1.0)
    assert cc.clasp_x(0.5, 1, p) == pytest.approx(1 / math.sqrt(5), abs=1e-15)
    assert cc.clasp_x(0.0, 1, p) == 0.0


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 1.0), st.sampled_from([1, 2]))
def test_clasp_x_agrees_with_transfer(t1, t2, frac, i):
    p = cc.ClaspParams(t1, t2)
    u = frac * p.tau(i)
    v = cc.partner_u(u, i, p)
    q = cc.transfer(u_1=u, u_2=v) if i == 1 else cc.transfer(u_1=v, u_2=u)
    expect = q.x_1 if i == 1 else q.x_2
    assert cc.clasp_x(u, i, p) == pytest.approx(expect, abs=1e-12)


def test_clasp_x_example_cross_check():
    p = cc.ClaspParams(0.8, 0.6)
    q = cc.transfer(u_1=0.3, u_2=0.6 * (1 - 0.3 / 0.8))
    assert cc.clasp_x(0.3, 1, p) == pytest.approx(q.x_1, abs=1e-14)


@given(st.floats(0.1, 1.0), st.floats(0.1, 0.99), st.floats(0.02, 0.98))
def test_dxdu_matches_central_difference(t1, t2, frac):
    p = cc.ClaspParams(t1, t2)
    u, e = frac * t1, 1e-6 * t1
    fd = (cc.clasp_x(u + e, 1, p) - cc.clasp_x(u - e, 1, p)) / (2 * e)
    assert cc.clasp_dxdu(u, 1, p) == pytest.approx(fd, rel=1e-6, abs=1e-7)


def test_empty_ranges():
    p = cc.ClaspParams(1.0, 1.0)
    assert cc.clasp_z(0.3, 0.3, 1, p) == 0.0
    assert cc.clasp_arclength(0.3, 0.3, 1, p) == 0.0


def test_singular_height_against_fixed_rule():
    p = cc.ClaspParams(1.0, 1.0)
    adaptive = cc.clasp_z(0.0, 1.0, 1, p)
    th, w = np.polynomial.legendre.leggauss(200)
    edges = np.linspace(0, math.pi / 2, 41)
    fixed = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * th + 0.5 * (a + b)
        s = np.sin(x)
        fixed += 0.5 * (b - a) * np.sum(w * s * cc.clasp_dxdu(np.minimum(s, 1.0), 1, p))
    assert math.isfinite(adaptive)
    assert adaptive == pytest.approx(fixed, abs=1e-9)


def test_arclength_golden_two_schemes():
    p = cc.ClaspParams(1.0, 1.0)
    a = cc.clasp_arclength(0.0, 1.0, 1, p)
    t = cc.clasp_table(1.0, 1.0, 0.002)
    assert a == pytest.approx(t.s[1][-1] - t.s[1][0] if t.s[1][-1] > t.s[1][0] else t.s[1][0] - t.s[1][-1], abs=1e-9)
    assert 1.0 < a < 2.0


@given(st.floats(0.2, 1.0), st.floats(0.2, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_arclength_at_least_chord(t1, t2, f1, f2):
    p = cc.ClaspParams(t1, t2)
    ua, ub = sorted((f1 * t1, f2 * t1))
    dx = cc.clasp_x(ub, 1, p) - cc.clasp_x(ua, 1, p)
    dz = cc.clasp_z(ua, ub, 1, p)
    assert cc.clasp_arclength(ua, ub, 1, p) >= math.hypot(dx, dz) - 1e-12


@pytest.mark.parametrize("tau", [(1.0, 1.0), (0.6, 0.9)])
def test_quadrature_tolerance_halving(tau):
    p = cc.ClaspParams(*tau)
    for fn in (cc.clasp_z, cc.clasp_arclength):
        coarse = fn(0.0, p.tau_1, 1, p, tol=1e-8)
        fine = fn(0.0, p.tau_1, 1, p, tol=5e-9)
        assert abs(coarse - fine) < 1e-8


def test_curvature_blows_up_at_the_tip():
    p = cc.ClaspParams(1.0, 1.0)
    k = [cc.clasp_curvature(u, 1, p) for u in (0.001, 0.01, 0.1)]
    assert k[0] > k[1] > k[2] and k[0] > 10
    assert cc.clasp_curvature(0.0, 1, p) == cc.CURVATURE_SENTINEL
    # at the far junction the curve has merely unit curvature
    assert cc.clasp_curvature(1.0, 1, p) == pytest.approx(1.0, abs=1e-12)


def test_curvature_bounded_when_partner_opening_below_one():
    p = cc.ClaspParams(0.8, 0.6)
    assert cc.clasp_curvature(0.0, 1, p) == pytest.approx(1 / math.sqrt(1 - 0.36), rel=1e-12)


def test_turning_angle_matches_integrated_curvature():
    p = cc.ClaspParams(0.9, 0.7)
    u = np.linspace(0.05, 0.85, 4001)
    x = cc.clasp_x(u, 1, p)
    z = np.array([cc.clasp_z(0.05, v, 1, p) for v in u])
    d = np.diff(np.stack([x, z], axis=1), axis=0)
    ang = np.arctan2(d[:, 1], d[:, 0])
    turning = np.sum(np.abs(np.diff(ang)))
    ds = np.linalg.norm(d, axis=1)
    kappa = cc.clasp_curvature(u, 1, p)
    integral = np.sum(0.5 * (kappa[1:-1] * (ds[:-1] + ds[1:])))
    assert turning == pytest.approx(integral, abs=1e-4)
    # chords at either end lag the true tangents by half a step
    assert turning == pytest.approx(ang[-1] - ang[0], abs=1e-12)
    assert ang[-1] - ang[0] < math.asin(0.85) - math.asin(0.05)


def test_tip_gap_symmetric_value():
    gap = cc.tip_gap(cc.ClaspParams(1.0, 1.0))
    assert 1.05 <= gap <= 1.07


@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0))
@settings(max_examples=25, deadline=None)
def test_tip_gap_is_side_symmetric(t1, t2):
    p = cc.ClaspParams(t1, t2)
    g1 = cc.clasp_height(1, p) + math.sqrt(1 - t1 * t1)
    assert cc.tip_gap(p) == pytest.approx(g1, abs=1e-9)


def test_table_struts_are_unit():
    t = cc.clasp_table(0.7, 0.9, 0.01)
    G = cc.tip_gap(cc.ClaspParams(0.7, 0.9))
    p1 = np.stack([t.x[1], np.zeros_like(t.x[1]), G - t.z[1]], axis=1)
    p2 = np.stack([np.zeros_like(t.x[2]), t.x[2], t.z[2]], axis=1)
    assert np.max(np.abs(np.linalg.norm(p1 - p2, axis=1) - 1)) < 1e-12


def test_bad_side_and_params():
    with pytest.raises(ValueError):
        cc.ClaspParams(0.0, 1.0)
    with pytest.raises(ValueError):
        cc.clasp_x(0.1, 3, cc.ClaspParams(1.0, 1.0))
