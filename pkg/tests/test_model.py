"""Local and transition maps, chart words, validation, conjugation."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sflab
from sflab import DomainError, WordDomainError
from sflab.jets import MODE_FULL
from sflab.model import (
    WORD_GLOBAL,
    check_positively_associated,
    evaluate_word,
    global_map,
    global_map_inverse,
    local_map,
    local_powers,
    rotation_rationality,
    stable_curve_point,
    stable_curve_velocity,
    to_input_chart,
    word_local,
    word_str,
)

DEFAULTS = sflab.system_from_dict({})


def patch_points(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    tr = DEFAULTS.transition
    radius = tr.patch_radius * np.sqrt(rng.uniform(0.0, 0.9, n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    u = radius * np.cos(phi)
    v = radius * np.sin(phi)
    s = rng.uniform(-0.05, 0.05, n)
    q = tr.q_z
    return np.stack([q.real + u, q.imag + v, s], axis=-1)


# --------------------------------------------------------------------------
# local map


def test_local_map_half_turn_example():
    spec = sflab.system_from_dict({"r": 2.0, "theta": math.pi, "lambda": 0.5})
    out = local_map(spec, np.array([1.0, 0.0, 0.4]), 1)
    assert np.allclose(out, [-2.0, 0.0, 0.2], atol=1e-12)


def test_local_map_identity_power():
    pts = patch_points(20, seed=1)
    assert np.array_equal(local_map(DEFAULTS, pts, 0), pts)


def test_local_map_semigroup_three_steps():
    pts = patch_points(50, seed=2)
    direct = local_map(DEFAULTS, pts, 3)
    stepped = pts
    for _ in range(3):
        stepped = local_map(DEFAULTS, stepped, 1)
    assert np.allclose(direct, stepped, rtol=1e-15, atol=1e-15)


def test_local_map_inverse_power():
    pts = patch_points(50, seed=3)
    back = local_map(DEFAULTS, local_map(DEFAULTS, pts, 4), -4)
    assert np.allclose(back, pts, rtol=1e-13, atol=1e-15)


@given(st.integers(-6, 6), st.integers(-6, 6))
@settings(deadline=None, max_examples=30)
def test_local_map_semigroup_property(k1, k2):
    pts = patch_points(10, seed=4)
    lhs = local_map(DEFAULTS, local_map(DEFAULTS, pts, k1), k2)
    rhs = local_map(DEFAULTS, pts, k1 + k2)
    scale = float(np.max(np.abs(rhs))) + 1.0
    assert np.allclose(lhs, rhs, atol=1e-13 * scale)


def test_local_powers_match_float_powers():
    local = DEFAULTS.local
    w, lam = local_powers(local, 8)
    assert abs(w - (local.r * np.exp(1j * local.theta)) ** 8) < 1e-13 * abs(w)
    assert abs(lam - local.lam**8) < 1e-15


# --------------------------------------------------------------------------
# transition map


def test_transition_map_example_point():
    out = global_map(DEFAULTS, np.array([0.6, 0.1, 0.0]))
    assert np.allclose(out, [0.01, 0.1, 0.6], atol=1e-15)


def test_transition_maps_tangency_point_to_axis():
    out = global_map(DEFAULTS, np.array([0.5, 0.0, 0.0]))
    assert np.array_equal(out, [0.0, 0.0, 0.5])


def test_transition_round_trip():
    pts = patch_points(100, seed=5)
    back = global_map_inverse(DEFAULTS, global_map(DEFAULTS, pts))
    assert np.allclose(back, pts, atol=1e-14)


def test_transition_rejects_points_outside_patch():
    with pytest.raises(DomainError):
        global_map(DEFAULTS, np.array([0.9, 0.0, 0.0]))


def test_input_chart_centers_q():
    chart = to_input_chart(DEFAULTS, np.array([0.5, 0.0, 0.0]))
    assert np.allclose(chart, 0.0, atol=1e-16)


def test_stable_curve_maps_to_vertical_axis():
    tau = np.linspace(-0.1, 0.1, 21)
    pts = stable_curve_point(DEFAULTS, tau)
    images = global_map(DEFAULTS, pts)
    assert np.max(np.hypot(images[:, 0], images[:, 1])) < 1e-15


def test_stable_curve_velocity_matches_differences():
    tau = np.array([0.03])
    h = 1e-6
    fd = (
        stable_curve_point(DEFAULTS, tau + h) - stable_curve_point(DEFAULTS, tau - h)
    ) / (2.0 * h)
    vel = stable_curve_velocity(DEFAULTS, tau)
    assert np.allclose(fd, vel, atol=1e-8)


# --------------------------------------------------------------------------
# chart words and jets


def fd_jet(spec, word, xi, h=1e-5):
    def value(p):
        return evaluate_word(spec, word, p, mode="value", check=False).value

    base = value(xi)
    dim = base.shape[-1]
    jac = np.zeros((dim, 2))
    hess = np.zeros((dim, 2, 2))
    shifts = [np.array([h, 0.0]), np.array([0.0, h])]
    for i, e in enumerate(shifts):
        jac[:, i] = (value(xi + e) - value(xi - e)) / (2.0 * h)
        hess[:, i, i] = (value(xi + e) + value(xi - e) - 2.0 * base) / (h * h)
    mixed = (
        value(xi + shifts[0] + shifts[1])
        - value(xi + shifts[0] - shifts[1])
        - value(xi - shifts[0] + shifts[1])
        + value(xi - shifts[0] - shifts[1])
    ) / (4.0 * h * h)
    hess[:, 0, 1] = mixed
    hess[:, 1, 0] = mixed
    return base, jac, hess


WORDS = [
    (WORD_GLOBAL,),
    (WORD_GLOBAL, word_local(3)),
    (WORD_GLOBAL, word_local(5), WORD_GLOBAL, word_local(3)),
    (WORD_GLOBAL, word_local(8), WORD_GLOBAL, word_local(1)),
]


@pytest.mark.parametrize("word", WORDS, ids=word_str)
def test_word_jets_match_finite_differences(word):
    rng = np.random.default_rng(11)
    for _ in range(4):
        xi = rng.uniform(-0.03, 0.03, 2)
        jet = evaluate_word(DEFAULTS, word, xi, mode=MODE_FULL, check=False)
        base, jac, hess = fd_jet(DEFAULTS, word, xi)
        assert np.allclose(jet.value, base, atol=1e-15)
        jac_scale = np.maximum(np.abs(jet.jac), 1.0)
        assert np.max(np.abs(jet.jac - jac) / jac_scale) < 1e-7
        hess_scale = np.maximum(np.abs(jet.hess), 1.0)
        assert np.max(np.abs(jet.hess - hess) / hess_scale) < 1e-5


def test_word_checks_patch_membership():
    word = (WORD_GLOBAL, word_local(1), WORD_GLOBAL)
    with pytest.raises(WordDomainError) as err:
        evaluate_word(DEFAULTS, word, np.zeros((1, 2)))
    assert err.value.atom_index == 2
    assert "patch" in str(err.value)


def test_word_str_formatting():
    assert word_str(WORDS[2]) == "[G, L^5, G, L^3]"


# --------------------------------------------------------------------------
# validation


def test_defaults_validate():
    report = sflab.validate_params(DEFAULTS)
    assert report.passed
    assert report.failures == ()
    assert not report.rational_rotation
    assert report.rotation_fraction is None


def test_zero_quadratic_coefficient_fails():
    report = sflab.validate_params(sflab.system_from_dict({"c": 0.0}))
    assert not report.passed
    names = [c.name for c in report.failures]
    assert "quadratic-coefficient" in names
    assert "quadratic-tangency-at-axis" in names


def test_rational_rotation_is_flagged():
    spec = sflab.system_from_dict({"theta": 2.0 * math.pi / 5.0})
    report = sflab.validate_params(spec)
    assert report.passed
    assert report.rational_rotation
    assert report.rotation_fraction == (1, 5)


def test_rotation_rationality_helper():
    assert rotation_rationality(2.0 * math.pi * 3.0 / 7.0) == (3, 7)
    assert rotation_rationality(1.0) is None


def test_positive_association_flag():
    assert check_positively_associated(DEFAULTS)
    assert not check_positively_associated(sflab.system_from_dict({"eps": 1.0}))
    flipped = sflab.system_from_dict({"c": -1.0, "eps": 1.0})
    assert check_positively_associated(flipped)


# --------------------------------------------------------------------------
# conjugation


def test_identity_conjugation_returns_same_parameters():
    same, conj = sflab.make_conjugate_system(DEFAULTS, rho=1.0, omega=0.0, mu=1.0)
    assert same.transition.q_z == DEFAULTS.transition.q_z
    assert same.transition.t0 == DEFAULTS.transition.t0
    assert same.transition.c == DEFAULTS.transition.c
    assert same.local.r == DEFAULTS.local.r
    assert conj.planar_factor == 1.0 + 0.0j


def test_conjugation_parameter_transport():
    rho, omega, mu = 2.0, math.pi / 3.0, 2.0
    spec, conj = sflab.make_conjugate_system(DEFAULTS, rho=rho, omega=omega, mu=mu)
    tr, tr0 = spec.transition, DEFAULTS.transition
    assert abs(tr.q_z - rho * np.exp(1j * omega) * tr0.q_z) < 1e-15
    assert math.isclose(tr.t0, mu * tr0.t0, rel_tol=1e-15)
    assert math.isclose(tr.c, tr0.c / rho, rel_tol=1e-15)
    assert math.isclose(tr.eps, rho * tr0.eps / mu, rel_tol=1e-15)
    assert math.isclose(tr.patch_radius, rho * tr0.patch_radius, rel_tol=1e-15)
    assert spec.local.r == DEFAULTS.local.r
    assert spec.local.theta == DEFAULTS.local.theta


def conjugacy_residual(spec, conj, pts, mapper, mapper0):
    image = conj.apply(mapper0(pts))
    direct = mapper(conj.apply(pts))
    scale = np.max(np.abs(direct)) + 1.0
    return float(np.max(np.abs(image - direct))) / scale


def test_conjugation_functional_equation():
    spec, conj = sflab.make_conjugate_system(DEFAULTS, rho=0.8, omega=0.7, mu=1.0)
    pts = patch_points(1000, seed=6)
    res_local = conjugacy_residual(
        spec,
        conj,
        pts,
        lambda p: local_map(spec, p, 1),
        lambda p: local_map(DEFAULTS, p, 1),
    )
    res_global = conjugacy_residual(
        spec,
        conj,
        pts,
        lambda p: global_map(spec, p),
        lambda p: global_map(DEFAULTS, p),
    )
    assert res_local < 1e-12
    assert res_global < 1e-12


def test_mirror_conjugation_flips_rotation():
    spec, conj = sflab.make_conjugate_system(
        DEFAULTS, rho=1.1, omega=0.4, mu=1.2, mirror=True
    )
    assert spec.local.theta == -DEFAULTS.local.theta
    pts = patch_points(200, seed=7)
    res = conjugacy_residual(
        spec,
        conj,
        pts,
        lambda p: local_map(spec, p, 1),
        lambda p: local_map(DEFAULTS, p, 1),
    )
    assert res < 1e-12


def test_invalid_conjugation_is_rejected():
    with pytest.raises(DomainError, match="leaves its chart"):
        sflab.make_conjugate_system(DEFAULTS, rho=2.0, omega=0.0, mu=1.0)


# --------------------------------------------------------------------------
# serialization


def test_dict_round_trip():
    data = {"r": 1.4, "theta": 0.9, "lambda": 0.35, "c": 1.2, "n0": 9, "m0": 24}
    spec = sflab.system_from_dict(data)
    out = sflab.system_to_dict(spec)
    back = sflab.system_from_dict(out)
    assert back == spec
    assert out["n0"] == 9 and isinstance(out["n0"], int)
    assert set(out) == set(sflab.CONFIG_KEYS)


def test_unknown_keys_are_rejected():
    with pytest.raises(ValueError, match="unknown system keys"):
        sflab.system_from_dict({"bogus": 1.0})


def test_conjugated_systems_are_not_serializable():
    spec, _conj = sflab.make_conjugate_system(DEFAULTS, rho=0.8, omega=0.7, mu=1.0)
    with pytest.raises(ValueError, match="base-family"):
        sflab.system_to_dict(spec)
