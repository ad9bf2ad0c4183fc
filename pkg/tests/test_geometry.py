import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wslab.cross_section import CrossSectionShape
from wslab.errors import GridTooCoarse, HypothesisViolated, NonPositiveCurvature, OutOfDomain
from wslab.geometry import (AngleFunction, CurveData, TubeSpec, bump_curve, check_hypotheses,
                            circle_curve, curve_roundtrip, gauss_curvature_formula, helix_curve,
                            integrate_frame, line_curve, metric_at, metric_by_differences,
                            metric_fields, ruled_surface_gauss_curvature, tang_frame_angle,
                            tube_map)


def _spec(curve, angle=None, shape=None, L=None):
    angle = AngleFunction.constant(curve.s_grid) if angle is None else angle
    shape = CrossSectionShape.disc(0.5) if shape is None else shape
    lo, hi = curve.span
    return TubeSpec(curve, angle, shape, L or 0.5 * (hi - lo), s_range=(lo, hi))


def test_circle_closes_after_one_turn():
    c = circle_curve(2.0, 0.0, 4 * np.pi, 0.01)
    fr = integrate_frame(c, AngleFunction.constant(c.s_grid))
    assert np.allclose(fr.points[-1], fr.points[0], atol=1e-8)
    assert np.allclose(fr.frames[-1], fr.frames[0], atol=1e-8)
    # the circle has radius 2: distance from the start point to the farthest point is 4
    assert np.max(np.linalg.norm(fr.points - fr.points[0], axis=1)) == pytest.approx(4.0, rel=1e-6)


def test_helix_roundtrip_recovers_curvature_and_torsion():
    c = helix_curve(0.7, 0.3, 0.0, 20.0, 0.01)
    fr = integrate_frame(c, AngleFunction.constant(c.s_grid))
    k_err, t_err = curve_roundtrip(fr)
    assert k_err < 1e-6 and t_err < 1e-6


def test_helix_axis_pitch_closed_form():
    k, t = 0.6, 0.8
    c = helix_curve(k, t, 0.0, 2 * np.pi / np.hypot(k, t), 0.001)
    fr = integrate_frame(c, AngleFunction.constant(c.s_grid))
    # after one period the helix advances 2 pi tau/(k^2 + tau^2) along its axis
    step = np.linalg.norm(fr.points[-1] - fr.points[0])
    assert step == pytest.approx(2 * np.pi * t / (k * k + t * t), rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(k=st.one_of(st.just(0.0), st.floats(0.05, 2.0)), tau=st.floats(-2.0, 2.0), rate=st.floats(-3.0, 3.0),
       th0=st.floats(-3.0, 3.0))
def test_frames_are_rotations(k, tau, rate, th0):
    if k == 0:
        tau = 0.0
    c = helix_curve(k, tau, 0.0, 5.0, 0.01)
    ang = AngleFunction.from_rate(c.s_grid, np.full_like(c.s_grid, rate), th0)
    fr = integrate_frame(c, ang)
    F = fr.frames
    assert np.max(np.abs(np.einsum("nij,nkj->nik", F, F) - np.eye(3))) < 1e-8
    assert np.max(np.abs(np.linalg.det(F) - 1)) < 1e-8


def test_curvature_validation():
    s = np.linspace(0, 1, 11)
    with pytest.raises(NonPositiveCurvature):
        CurveData(s, -np.ones(11), np.zeros(11))
    with pytest.raises(NonPositiveCurvature):
        CurveData(s, np.zeros(11), np.ones(11))
    with pytest.raises(ValueError):
        CurveData(s[::-1], np.ones(11), np.zeros(11))


def test_angle_consistency_is_enforced():
    s = np.linspace(0, 1, 21)
    with pytest.raises(ValueError):
        AngleFunction(s, s ** 2, np.ones_like(s))
    a = AngleFunction.from_rate(s, 2 * s)
    assert np.allclose(a.theta_at(s), s ** 2, atol=1e-12)


def test_coarse_grid_is_rejected():
    s = np.linspace(0, 10, 6)
    c = CurveData(s, np.full(6, 3.0), np.full(6, 3.0))
    with pytest.raises(GridTooCoarse):
        integrate_frame(c, AngleFunction.constant(s))


@settings(max_examples=30, deadline=None)
@given(s=st.floats(-4, 4), r=st.floats(0, 0.99), phi=st.floats(0, 2 * np.pi),
       k=st.floats(0.0, 1.5), w=st.floats(-3, 3))
def test_metric_identities(s, r, phi, k, w):
    c = CurveData.from_functions(lambda x: k, lambda x: 0.0, np.linspace(-5, 5, 201))
    ang = AngleFunction.from_rate(c.s_grid, np.full(201, -w), 0.3)
    spec = TubeSpec(c, ang, CrossSectionShape.disc(0.6), 5.0)
    t = 0.6 * r * np.array([np.cos(phi), np.sin(phi)])
    m = metric_at(spec, s, t)
    assert np.linalg.det(m.G) == pytest.approx(m.h ** 2, rel=1e-12)
    assert np.max(np.abs(m.G @ m.G_inv - np.eye(3))) < 1e-12
    a = spec.a
    assert 1 - a * k - 1e-12 <= m.h <= 1 + a * k + 1e-12
    assert float(metric_fields(spec, s, 0.0, 0.0)[0]) == 1.0


def test_metric_matches_tube_map_derivatives():
    c = helix_curve(0.5, 0.4, -5.0, 5.0, 0.002)
    ang = AngleFunction.from_rate(c.s_grid, 0.7 * np.cos(c.s_grid))
    spec = TubeSpec(c, ang, CrossSectionShape.ellipse(0.8, 0.4), 4.0)
    for s, t in [(0.3, (0.2, -0.1)), (-1.7, (-0.5, 0.2)), (2.2, (0.0, 0.3))]:
        G_fd = metric_by_differences(spec, s, np.array(t))
        assert np.max(np.abs(G_fd - metric_at(spec, s, t).G)) < 1e-6


def test_tube_map_domain():
    spec = _spec(line_curve(-2, 2))
    with pytest.raises(OutOfDomain):
        tube_map(spec, 0.0, (0.6, 0.0))
    assert np.allclose(tube_map(spec, 1.0, (0.0, 0.0)), [3.0, 0.0, 0.0])


def test_hypothesis_violation_names_quantity():
    c = bump_curve(3.0 * np.e, 1.0, -3, 3)
    with pytest.raises(HypothesisViolated) as err:
        TubeSpec(c, AngleFunction.constant(c.s_grid), CrossSectionShape.disc(0.5), 3.0)
    assert err.value.quantity == "a*kappa_sup"


def test_straight_tube_margin_is_one():
    rep = check_hypotheses(_spec(line_curve(-5, 5)), sample_count=500)
    assert rep.margin == 1.0 and rep.passed


def test_bent_tube_hypotheses():
    c = bump_curve(0.5 * np.e, 2.0, -5, 5)
    spec = TubeSpec(c, tang_frame_angle(c), CrossSectionShape.disc(1.0), 5.0)
    rep = check_hypotheses(spec, sample_count=1000)
    assert rep.margin == pytest.approx(0.5, abs=1e-4)


def test_ruled_surface_helicoid_curvature():
    c = line_curve(-3, 3, 0.001)
    w = 1.3
    ang = AngleFunction.from_rate(c.s_grid, np.full_like(c.s_grid, w))
    spec = TubeSpec(c, ang, CrossSectionShape.disc(1.0), 3.0)
    r = 0.5
    exact = -w * w / (1 + r * r * w * w) ** 2   # helicoid at distance r from its axis
    assert ruled_surface_gauss_curvature(spec, 0.4) == pytest.approx(exact, rel=1e-5)
    assert gauss_curvature_formula(spec, 0.4) == pytest.approx(exact, rel=1e-12)


def test_tang_frame_ruled_surface_is_flat():
    c = helix_curve(0.5, 0.6, -3, 3, 0.001)
    spec = TubeSpec(c, tang_frame_angle(c), CrossSectionShape.disc(1.0), 3.0)
    assert abs(ruled_surface_gauss_curvature(spec, 0.0)) < 1e-5
    assert abs(gauss_curvature_formula(spec, 0.0)) < 1e-12


def test_rotated_spec_has_same_image():
    c = helix_curve(0.4, 0.2, -2, 2, 0.005)
    ang = AngleFunction.from_rate(c.s_grid, np.sin(c.s_grid))
    spec = TubeSpec(c, ang, CrossSectionShape.ellipse(0.6, 0.3, tilt=0.2), 2.0)
    rot = spec.rotated(0.7)
    t = np.array([0.3, 0.1])
    from wslab.cross_section import rotation
    t_rot = rotation(0.7) @ t
    for s in (-1.0, 0.0, 1.5):
        assert np.allclose(tube_map(spec, s, t), tube_map(rot, s, t_rot), atol=1e-12)
