"""Planar curve utilities: slopes, curvature, closest points, rotation."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sflab import DomainError, NumericsError, PlanarCurve, hausdorff_distance
from sflab.geometry import (
    ClosestPoint,
    absolute_slope,
    angle_mod_2pi,
    closest_point_and_angle,
    fit_line_segment,
    max_absolute_slope,
    max_curvature,
    point_to_polyline,
    rational_signature,
    rotation_number,
    wrap_angle,
)


def circle(radius: float, n: int, center=(0.0, 0.0), arc=(0.0, 2.0 * math.pi)) -> PlanarCurve:
    phi = np.linspace(arc[0], arc[1], n)
    pts = np.stack(
        [center[0] + radius * np.cos(phi), center[1] + radius * np.sin(phi)], axis=-1
    )
    tangents = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    return PlanarCurve(pts, tangents)


def segment(p0, p1, n: int) -> PlanarCurve:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    ss = np.linspace(0.0, 1.0, n)[:, None]
    pts = p0 + ss * (p1 - p0)
    direction = (p1 - p0) / np.linalg.norm(p1 - p0)
    tangents = np.broadcast_to(direction, pts.shape).copy()
    return PlanarCurve(pts, tangents)


# --------------------------------------------------------------------------
# slopes


def test_absolute_slope_values():
    assert absolute_slope(np.array([3.0, 4.0, 10.0])) == 2.0
    assert absolute_slope(np.array([0.0, 2.0, 1.0])) == 0.5
    assert absolute_slope(np.array([1.0, 0.0, 0.0])) == 0.0


def test_max_absolute_slope_picks_worst_vector():
    vectors = np.array([[3.0, 4.0, 10.0], [0.0, 2.0, 1.0], [1.0, 0.0, 0.0]])
    assert max_absolute_slope(vectors) == 2.0


@given(
    st.floats(-5.0, 5.0),
    st.floats(-5.0, 5.0),
    st.floats(-5.0, 5.0),
    st.floats(0.1, 3.0),
)
def test_absolute_slope_invariant_under_planar_rotation(x, y, t, phi):
    v = np.array([x, y, t])
    if np.hypot(x, y) < 1e-6:
        return
    c, s = math.cos(phi), math.sin(phi)
    rotated = np.array([c * x - s * y, s * x + c * y, t])
    assert math.isclose(
        absolute_slope(v), absolute_slope(rotated), rel_tol=1e-9, abs_tol=1e-12
    )


@given(st.floats(-5.0, 5.0), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
def test_absolute_slope_planar_scaling(x, y, t):
    if np.hypot(x, y) < 1e-6:
        return
    v = np.array([x, y, t])
    doubled = np.array([2.0 * x, 2.0 * y, t])
    assert math.isclose(absolute_slope(doubled), 0.5 * absolute_slope(v), rel_tol=1e-12)


# --------------------------------------------------------------------------
# curvature


def test_circle_curvature():
    curve = circle(2.0, 100)
    assert abs(max_curvature(curve) - 0.5) < 1e-3


def test_straight_segment_curvature_vanishes():
    curve = segment((0.0, -1.0), (0.5, 1.0), 64)
    assert max_curvature(curve) < 1e-12


def test_curvature_scaling_covariance():
    curve = circle(1.0, 200, arc=(0.3, 2.1))
    kappa = max_curvature(curve)
    scaled = PlanarCurve(4.0 * curve.points, curve.tangents)
    assert math.isclose(max_curvature(scaled), kappa / 4.0, rel_tol=1e-12)


# --------------------------------------------------------------------------
# closest point and oriented angle


def test_vertical_segment_closest_point():
    curve = segment((0.3, -0.5), (0.3, 0.5), 201)
    cp = closest_point_and_angle(curve, 1.0)
    assert isinstance(cp, ClosestPoint)
    assert not cp.endpoint
    assert abs(cp.foot - 0.3) < 1e-12
    assert abs(cp.distance - 0.3) < 1e-12
    assert abs(cp.angle - math.pi / 2.0) < 1e-9


def test_closest_point_requires_entering_disk():
    curve = segment((-1.0, 2.0), (1.0, 2.0), 51)
    with pytest.raises(DomainError):
        closest_point_and_angle(curve, 1.0)


def test_closest_point_rejects_tight_curvature():
    curve = circle(0.5, 100, center=(0.45, 0.0))
    with pytest.raises(DomainError):
        closest_point_and_angle(curve, 1.0)


def test_closest_point_uniqueness_guard():
    # an even sample count puts two symmetric samples at the same
    # distance with a large arc gap between them
    curve = segment((-0.2, 0.5), (0.2, 0.5), 42)
    with pytest.raises(NumericsError):
        closest_point_and_angle(curve, 1.0)


def test_closest_point_endpoint_flag():
    curve = segment((0.1, 0.0), (0.5, 0.0), 41)
    cp = closest_point_and_angle(curve, 1.0)
    assert cp.endpoint
    assert abs(cp.foot - 0.1) < 1e-14


def test_closest_point_scales_exactly_with_curve():
    curve = segment((0.4, -0.3), (0.2, 0.5), 301)
    cp = closest_point_and_angle(curve, 1.0)
    scaled = curve.scaled(0.5j)
    cp2 = closest_point_and_angle(scaled, 0.5)
    assert cp2.foot == cp.foot * 0.5j
    assert abs(wrap_angle(cp2.angle - cp.angle - math.pi / 2.0)) < 1e-12


# --------------------------------------------------------------------------
# rotation numbers


def test_rotation_number_exact_fifth():
    theta = 2.0 * math.pi / 5.0
    angles = np.array([angle_mod_2pi(k * theta) for k in range(10)])
    est = rotation_number(angles)
    assert est.value == pytest.approx(0.2, abs=1e-12)
    assert rational_signature(angles) == (5, 1)


def test_rotation_number_irrational_angle():
    angles = np.array([angle_mod_2pi(k * 1.0) for k in range(50)])
    est = rotation_number(angles)
    assert abs(est.value - 1.0 / (2.0 * math.pi)) < 1e-12
    assert rational_signature(angles) is None


def test_rational_signature_two_fifths():
    theta = 4.0 * math.pi / 5.0
    angles = np.array([angle_mod_2pi(k * theta) for k in range(10)])
    assert rational_signature(angles) == (5, 2)


@given(st.integers(1, 11), st.integers(1, 11), st.floats(0.0, 6.2))
@settings(deadline=None)
def test_rotation_number_of_rigid_rotation(p, q, start):
    if math.gcd(p, q) != 1 or p >= q:
        return
    theta = 2.0 * math.pi * p / q
    angles = np.array([angle_mod_2pi(start + k * theta) for k in range(4 * q)])
    est = rotation_number(angles)
    assert abs(est.value - p / q) < 1e-9
    # the signature reports the winding of the shortest lift, so the
    # second entry is min(p, q - p)
    assert rational_signature(angles) == (q, min(p, q - p))


# --------------------------------------------------------------------------
# angles


@given(st.floats(-50.0, 50.0))
def test_wrap_angle_range_and_consistency(x):
    w = wrap_angle(x)
    assert -math.pi < w <= math.pi + 1e-15
    assert abs(complex(math.cos(w), math.sin(w)) - complex(math.cos(x), math.sin(x))) < 1e-9


@given(st.floats(-50.0, 50.0))
def test_angle_mod_2pi_range(x):
    a = angle_mod_2pi(x)
    assert 0.0 <= a < 2.0 * math.pi


# --------------------------------------------------------------------------
# line fits and distances


def test_fit_line_segment_exact_line():
    curve = segment((0.5, -0.2), (0.1, 0.6), 129)
    fit = fit_line_segment(curve)
    assert fit.residual < 1e-12
    assert fit.rms_residual <= fit.residual
    seg = fit.segment
    # the fitted foot is the perpendicular foot of the origin
    assert abs(seg.foot.real * seg.direction.real + seg.foot.imag * seg.direction.imag) < 1e-12


def test_fit_line_segment_sees_bending():
    curve = circle(1.0, 200, center=(1.5, 0.0), arc=(math.pi - 0.5, math.pi + 0.5))
    fit = fit_line_segment(curve)
    assert fit.residual > 1e-3


def test_hausdorff_identical_and_offset():
    a = segment((-1.0, 0.2), (1.0, 0.2), 101)
    b = segment((-1.0, 0.21), (1.0, 0.21), 101)
    assert hausdorff_distance(a, a) == 0.0
    assert abs(hausdorff_distance(a, b) - 0.01) < 1e-12


def test_point_to_polyline_square():
    poly = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    pts = np.array([[0.5, 0.25], [2.0, 1.0], [0.0, -0.5]])
    dists = point_to_polyline(pts, poly)
    assert np.allclose(dists, [0.25, 1.0, 0.5], atol=1e-14)


def test_clipped_to_disk_keeps_contiguous_inside_run():
    curve = segment((-2.0, 0.1), (2.0, 0.1), 401)
    clipped = curve.clipped_to_disk(1.0)
    norms = np.linalg.norm(clipped.points, axis=1)
    assert np.all(norms <= 1.0 + 1e-12)
    assert clipped.points.shape[0] >= 2
    # the closest sample to the origin is preserved
    assert min(norms) == pytest.approx(0.1, abs=1e-12)
