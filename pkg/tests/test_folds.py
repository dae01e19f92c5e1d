"""Folding curves: loci, tangency classification, rotation transport."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

import sflab
from sflab import (
    DomainError,
    fold_locus,
    initial_sheet,
    measure_fold,
    rotated_fold,
    verify_quadratic_tangency,
)
from sflab.folds import FOLD_METRICS_HEADER, refined_closest_point
from sflab.geometry import (
    angle_mod_2pi,
    closest_point_and_angle,
    point_to_polyline,
    wrap_angle,
)
from sflab.jets import Jet2
from sflab.model import word_local


# --------------------------------------------------------------------------
# closed-form fold loci of the first sheet


def test_default_sheet_folds_on_vertical_line():
    sheet = initial_sheet(sflab.system_from_dict({}))
    fold = fold_locus(sheet)
    assert np.max(np.abs(fold.points[:, 0])) < 1e-15
    assert np.max(np.abs(fold.heights - 0.5)) < 1e-15
    assert np.max(fold.residuals) < 1e-15
    assert np.max(fold.curvatures) < 1e-12
    # the fold sits over the u = 0 axis of the patch
    assert np.max(np.abs(fold.params[:, 0])) < 1e-15


def test_cross_term_tilts_fold_line():
    spec = sflab.system_from_dict({"d": 0.1})
    fold = fold_locus(initial_sheet(spec))
    # planar degeneracy happens where 2c u + d v = 0
    assert np.max(np.abs(fold.params[:, 0] + 0.05 * fold.params[:, 1])) < 1e-15


def test_quadratic_height_bends_fold_into_parabola():
    spec = sflab.system_from_dict({"e": 0.2})
    fold = fold_locus(initial_sheet(spec))
    dev = np.abs(fold.points[:, 0] - 0.2 * fold.points[:, 1] ** 2)
    assert np.max(dev) < 1e-15
    assert np.max(np.abs(fold.heights - 0.5)) < 1e-15


# --------------------------------------------------------------------------
# tangency classification


def test_sheet_has_quadratic_tangency_at_axis():
    report = verify_quadratic_tangency(initial_sheet(sflab.system_from_dict({})))
    assert report.quadratic
    assert abs(report.phi) < 1e-12
    assert abs(report.phi_t) < 1e-12
    assert abs(report.phi_tt - 2.0) < 1e-12


def test_flat_plane_is_degenerate():
    jet = Jet2(
        np.array([0.0, 0.1, 0.3]),
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.zeros((3, 2, 2)),
    )
    report = verify_quadratic_tangency(jet)
    assert report.classification == "degenerate tangency"
    assert not report.quadratic


def test_vertical_plane_is_not_a_graph():
    jet = Jet2(
        np.array([0.2, 0.0, 0.3]),
        np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]),
        np.zeros((3, 2, 2)),
    )
    with pytest.raises(DomainError, match="not locally a graph"):
        verify_quadratic_tangency(jet)


# --------------------------------------------------------------------------
# master fold curves


@pytest.mark.parametrize("m", [0, 8, 15])
def test_master_fold_residuals(pipe, m):
    master = pipe.table_master(m)
    assert np.max(master.residuals) < 1e-11
    assert np.array_equal(master.heights, master.points[:, 2])
    assert master.orientation in (-1, 1)


def test_master_fold_is_c1_sampled(pipe):
    master = pipe.table_master(0)
    angles = np.unwrap(np.arctan2(master.tangents[:, 1], master.tangents[:, 0]))
    max_turn = np.max(np.abs(np.diff(angles)))
    assert max_turn < math.radians(5.0)


def test_fold_locus_stable_under_refinement(pipe, system):
    piece = pipe.piece(3)
    coarse = fold_locus(piece, min_samples=64)
    fine = fold_locus(piece, min_samples=128)
    d = np.max(point_to_polyline(coarse.points[:, :2], fine.points[:, :2]))
    assert d < 1e-9


# --------------------------------------------------------------------------
# rotation transport


def test_fold_equivariance_against_composed_word(pipe, system):
    piece = pipe.piece(8)
    composed = replace(piece, word=piece.word + (word_local(3),), label="h8-L3")
    independent = fold_locus(composed)
    rotated = rotated_fold(pipe.table_master(8), 3, system.local)
    pa = independent.points[:, :2]
    pb = rotated.points[:, :2]
    keep_a = np.linalg.norm(pa, axis=1) <= 0.95
    keep_b = np.linalg.norm(pb, axis=1) <= 0.95
    assert np.max(point_to_polyline(pa[keep_a], pb)) < 1e-12
    assert np.max(point_to_polyline(pb[keep_b], pa)) < 1e-12


def test_rotated_fold_composition_is_exact(pipe, system):
    master = pipe.table_master(8)
    nested = rotated_fold(rotated_fold(master, 2, system.local), 3, system.local)
    direct = rotated_fold(master, 5, system.local)
    assert np.array_equal(nested.points, direct.points)
    assert np.array_equal(nested.tangents, direct.tangents)
    assert np.array_equal(nested.curvatures, direct.curvatures)
    assert nested.rotations == direct.rotations == 5


def test_rotated_fold_scales_heights_by_lambda(pipe, system):
    master = pipe.table_master(5)
    rotated = rotated_fold(master, 2, system.local)
    lam = system.local.lam
    assert np.allclose(rotated.heights, master.heights * lam * lam, rtol=1e-15)


def test_metric_transport_identities(pipe, system):
    local = system.local
    base = pipe.table_metric(5, 0)
    one = pipe.table_metric(5, 1)
    three = pipe.table_metric(5, 3)
    assert one.distance / base.distance == pytest.approx(local.r, rel=1e-15)
    expected_angle = angle_mod_2pi(base.angle + 3.0 * local.theta)
    assert abs(wrap_angle(three.angle - expected_angle)) < 1e-12
    assert three.curvature * local.r**3 == pytest.approx(base.curvature, rel=1e-14)


def test_fold_angles_go_cauchy_in_depth(pipe):
    angles = [pipe.table_metric(m, 0).angle for m in range(16)]
    diffs = [abs(wrap_angle(a1 - a0)) for a0, a1 in zip(angles, angles[1:])]
    assert diffs[-1] < 1e-3
    assert all(d < 1e-8 for d in diffs[10:])


def test_measure_fold_matches_refined_foot(pipe, system):
    master = pipe.table_master(4)
    metric = measure_fold(master, 4, 0, system.local, 1.0)
    cp = refined_closest_point(master, 1.0)
    assert metric.distance == cp.distance
    assert metric.m == 4 and metric.n == 0
    row = metric.csv_row()
    assert len(row.split(",")) == len(FOLD_METRICS_HEADER.split(","))


def test_refined_closest_point_agrees_with_polyline_estimate(pipe):
    for m in (0, 8):
        master = pipe.table_master(m)
        cp_poly = closest_point_and_angle(master.planar, 1.0)
        cp_ref = refined_closest_point(master, 1.0)
        assert abs(cp_ref.distance - cp_poly.distance) < 1e-12 * cp_ref.distance
        assert abs(cp_ref.foot - cp_poly.foot) < 1e-6 * cp_ref.distance
        assert abs(wrap_angle(cp_ref.angle - cp_poly.angle)) < 1e-6
