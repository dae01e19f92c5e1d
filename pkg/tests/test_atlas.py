"""Unstable-manifold sheets, recrossing search, disk family, probes."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

import sflab
from sflab.atlas import DiskGraph, ProbeCurve
from sflab.model import (
    check_positively_associated,
    local_map,
    local_powers,
    to_input_chart,
    word_str,
)


# --------------------------------------------------------------------------
# recrossing


def test_recrossing_trip_integers(pipe):
    rec = pipe.recrossing()
    assert rec.u == 3
    assert rec.q_margin_cells >= 1.5
    assert word_str(rec.sheet.word) == "[G, L^11]"


def test_recrossing_sheet_passes_through_tangency_point(pipe, system):
    rec = pipe.recrossing()
    value = rec.sheet.jets(rec.q_xi[None, :], "value").value[0]
    q = system.transition.q_z
    assert abs(complex(value[0], value[1]) - q) < 1e-12


def test_recrossing_is_minimal(pipe, system):
    rec = pipe.recrossing()
    with pytest.raises(sflab.AtlasError, match="no recrossing"):
        sflab.find_recrossing(system, u_max=rec.u - 1)


def test_recrossing_invariant_under_full_turn(pipe):
    wrapped = sflab.system_from_dict({"theta": 1.0 + 2.0 * math.pi})
    rec = sflab.find_recrossing(wrapped)
    assert rec.u == pipe.recrossing().u


def test_no_recrossing_without_positive_association():
    flipped = sflab.system_from_dict({"eps": 1.0})
    assert not check_positively_associated(flipped)
    with pytest.raises(sflab.AtlasError, match="no recrossing"):
        sflab.find_recrossing(flipped, u_max=12)


# --------------------------------------------------------------------------
# disk family


def test_resolved_trips(pipe):
    trips = pipe.system.trips
    assert (trips.n0, trips.u, trips.j, trips.m0) == (8, 3, 1, 30)


def test_crossing_heights_are_geometric(pipe, disks, system):
    lam = system.local.lam
    heights = [disks.crossing(m).height for m in disks.m_values]
    for h0, h1 in zip(heights, heights[1:]):
        assert abs(h1 / h0 - lam) < 1e-10


def test_first_crossing_sits_on_vertical_axis(pipe, disks):
    lam = pipe.system.local.lam
    m0 = pipe.system.trips.m0
    c0 = disks.crossing(0)
    assert np.hypot(c0.point[0], c0.point[1]) < 1e-12
    assert math.isclose(c0.height, lam**m0 * disks.t_hat, rel_tol=1e-12)
    assert c0.margin > 0.0


def test_sigma0_combines_base_slope_and_contraction(pipe, disks):
    local = pipe.system.local
    m0 = pipe.system.trips.m0
    expected = disks.slope_of_base * (local.lam / local.r) ** m0
    assert math.isclose(disks.sigma0, expected, rel_tol=1e-6)


def test_slope_table_obeys_contraction_bound(pipe, disks):
    local = pipe.system.local
    for m, slope in pipe.slope_table():
        bound = disks.sigma0 * (local.lam / local.r) ** m
        assert slope <= bound * 1.05


def test_dense_slope_resampling_agrees(pipe, disks):
    local = pipe.system.local
    m = 5
    coarse = dict(pipe.slope_table())[m]
    dense = sflab.sample_max_slope(disks.disk(m), 512)
    assert dense <= disks.sigma0 * (local.lam / local.r) ** m * 1.05
    assert abs(dense - coarse) <= 0.05 * coarse


def test_disk_word_composition(pipe, disks):
    # the family is normalized m0 local steps below the stable crossing
    trips = pipe.system.trips
    assert word_str(disks.disk(4).word) == (
        f"[G, L^{trips.n0 + trips.u}, G, L^{trips.j + trips.m0 + 4}]"
    )


def test_disk_graph_solves_patch_coordinates(pipe, disks, system):
    disk = disks.disk(4)
    graph = DiskGraph(disk)
    rng = np.random.default_rng(21)
    params = rng.uniform(-0.003, 0.003, (40, 2))
    heights, _ds, _d2s = graph.height(params, "value")
    xi = graph.solve(params)
    piece_pts = disk.jets(xi, "value").value
    chart = to_input_chart(system, piece_pts)
    a = system.local.a
    assert np.max(np.abs(chart[:, :2] - params)) < 5e-12 * a
    assert np.array_equal(chart[:, 2], heights)
    # the disk is nearly horizontal there: heights stay below its ceiling
    assert np.max(np.abs(heights)) < 0.05


def test_disk_sequence_rejects_negative_depth(system, disks):
    with pytest.raises(sflab.AtlasError, match="m below"):
        sflab.bent_disk_sequence(system, disks, -1)


def test_disk_sequence_extends_beyond_family(pipe, disks, system):
    piece = pipe.piece(16)
    assert 16 not in disks.m_values
    assert word_str(piece.word) == "[G, L^8]"


# --------------------------------------------------------------------------
# planar projection equivariance


def test_planar_projection_commutes_with_local_map(system):
    pts = np.array([[0.1, -0.05, 0.3], [0.02, 0.04, -0.2], [-0.3, 0.22, 0.1]])
    out = local_map(system, pts, 1)
    w1, _lam1 = local_powers(system.local, 1)
    z = (pts[:, 0] + 1j * pts[:, 1]) * w1
    assert np.array_equal(out[:, 0], z.real)
    assert np.array_equal(out[:, 1], z.imag)


# --------------------------------------------------------------------------
# probe crossings


def test_probe_anchor_on_vertical_axis(system, pipe):
    probe = ProbeCurve(system=pipe.system)
    lam = pipe.system.local.lam
    n0 = pipe.system.trips.n0
    t0 = pipe.system.transition.t0
    anchor = probe.anchor()
    assert np.allclose(anchor, [0.0, 0.0, lam**n0 * t0], atol=1e-18)


def test_probe_crossings_are_transversal(pipe):
    for row in pipe.probe_table():
        assert row.crossing.margin > 0.0
        assert row.distance_to_q > 0.0


def test_probe_distances_contract_like_lambda(pipe):
    lam = pipe.system.local.lam
    rows = {p.m: p.distance_to_q for p in pipe.probe_table()}
    ms = sorted(rows)
    for m in ms[:-1]:
        ratio = rows[m + 1] / rows[m]
        if m >= 4:
            assert abs(ratio / lam - 1.0) < 0.01
        if m >= 12:
            assert abs(ratio / lam - 1.0) < 0.02


def test_probe_normalized_distances_go_cauchy(pipe):
    lam = pipe.system.local.lam
    rows = {p.m: p.distance_to_q / lam**p.m for p in pipe.probe_table()}
    ms = sorted(rows)
    tail = [rows[m] for m in ms if m >= 12]
    for v0, v1 in zip(tail, tail[1:]):
        assert abs(v1 - v0) / v0 < 5e-6


def test_probe_distance_equals_height_without_frame_rotation(pipe):
    # with psi = 0 the probe pullback is purely vertical, so the
    # crossing distance reduces to the disk height over the tangency axis
    for row in pipe.probe_table():
        assert math.isclose(row.crossing.height, row.distance_to_q, rel_tol=1e-9)


def test_probe_intersection_single_depth(pipe, disks, system):
    probe = sflab.probe_intersection(pipe.system, disks, 6)
    assert probe.m == 6
    assert probe.crossing.label == "probe-crossing-6"
    table = {p.m: p for p in pipe.probe_table()}
    assert math.isclose(
        probe.distance_to_q, table[6].distance_to_q, rel_tol=1e-12
    )
