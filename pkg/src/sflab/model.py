"""The saddle-focus model system.

A system couples a linear local map on a solid cylinder with a quadratic
transition map modelling the return of the unstable plane to a tangency
with the stable axis.

Local map, on U_a = {|z| <= a, 0 <= t <= a}:

    L(z, t) = (r e^{i theta} z, lambda t),   r > 1, 0 < lambda < 1.

The base plane {t = 0} is the local unstable manifold, the t-axis the
local stable manifold.

Transition map, defined on a small vertical cylinder (the "patch") around
the tangency point q = (q_z, 0) in the base plane.  Writing the input in
tangency-adapted coordinates u + iv = e^{-i beta} (z - q_z) with
beta = arg q_z and s = t, the output is

    z' = e^{i psi} ((c u^2 + d u v + e v^2 + eps s) + i b v)
    t' = t0 + g u.

The base family has psi = 0, b = 1, g = 1; the extra parameters make the
family closed under linear conformal conjugations, which multiply the
plane by rho e^{i omega} and the vertical axis by mu.  The image of q is
q_hat = (0, t0) on the stable axis, and the image of the base plane is
tangent to the plane {x = 0} at q_hat to exactly second order, with
quadratic normal form c (t - t0)^2 + d (t - t0) y + e y^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import DomainError, WordDomainError
from .jets import MODE_FULL, MODE_JAC, MODE_VALUE, Jet2, affine_jet, push_linear, push_smooth

Array = np.ndarray

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# parameter records


@dataclass(frozen=True)
class SaddleFocusParams:
    """Linear local map parameters: planar expansion r e^{i theta}, vertical
    contraction lambda, chart radius a."""

    r: float = 1.5
    theta: float = 1.0
    lam: float = 0.4
    a: float = 1.0


@dataclass(frozen=True)
class GlobalMapParams:
    """Quadratic transition map parameters.

    q_z is the planar tangency point, t0 the height of its image on the
    stable axis, (c, d, e) the quadratic normal form, eps the coefficient
    coupling input height to output normal displacement, patch_radius the
    radius of the planar domain around q_z.  (psi, b, g) extend the base
    family so it is closed under conjugation; base systems have
    psi = 0, b = 1, g = 1.
    """

    q_z: complex = 0.5 + 0.0j
    t0: float = 0.5
    c: float = 1.0
    eps: float = -1.0
    d: float = 0.0
    e: float = 0.0
    patch_radius: float = 0.2
    psi: float = 0.0
    b: float = 1.0
    g: float = 1.0

    @property
    def is_base(self) -> bool:
        return self.psi == 0.0 and self.b == 1.0 and self.g == 1.0


@dataclass(frozen=True)
class TripIntegers:
    """Iteration counts of the homoclinic trip.

    n0: iterations bringing the first bent disk back over the tangency;
    u: extra iterations until the lower sheet recrosses the stable curve;
    j: iterations after the second transition before counting disks;
    m0: depth offset making every transversal disk proper.
    u = 0 or m0 = 0 mean "resolve automatically".
    """

    n0: int = 8
    u: int = 0
    j: int = 1
    m0: int = 0

    @property
    def resolved(self) -> bool:
        return self.u > 0 and self.m0 > 0


@dataclass(frozen=True)
class SystemSpec:
    """A complete model system: local map, transition map, trip integers."""

    local: SaddleFocusParams = SaddleFocusParams()
    transition: GlobalMapParams = GlobalMapParams()
    trips: TripIntegers = TripIntegers()
    label: str = "system"

    @property
    def beta(self) -> float:
        """Argument of the planar tangency point."""
        return math.atan2(self.transition.q_z.imag, self.transition.q_z.real)


# --------------------------------------------------------------------------
# chart words

ATOM_LOCAL = "L"
ATOM_GLOBAL = "G"

Atom = tuple[str, int]


def word_local(k: int) -> Atom:
    return (ATOM_LOCAL, int(k))


WORD_GLOBAL: Atom = (ATOM_GLOBAL, 0)


def word_str(word: tuple[Atom, ...]) -> str:
    parts = []
    for kind, k in word:
        parts.append("G" if kind == ATOM_GLOBAL else f"L^{k}")
    return "[" + ", ".join(parts) + "]"


# --------------------------------------------------------------------------
# cached planar/vertical powers of the local map

_POWER_CACHE: dict[tuple[float, float, float], list[tuple[complex, float]]] = {}


def local_powers(params: SaddleFocusParams, k: int) -> tuple[complex, float]:
    """(r e^{i theta})^k and lambda^k, built by iterated products.

    Iterated products keep consecutive powers related by exactly one
    floating point multiplication, which makes per-step ratios of derived
    quantities exact to machine precision.  Negative k uses iterated
    products of the inverse factors.
    """
    key = (params.r, params.theta, params.lam)
    if k >= 0:
        cache = _POWER_CACHE.setdefault(key, [(1.0 + 0.0j, 1.0)])
        w1 = params.r * complex(math.cos(params.theta), math.sin(params.theta))
        while len(cache) <= k:
            w, p = cache[-1]
            cache.append((w * w1, p * params.lam))
        return cache[k]
    inv_key = (1.0 / params.r, -params.theta, 1.0 / params.lam)
    cache = _POWER_CACHE.setdefault(inv_key, [(1.0 + 0.0j, 1.0)])
    w1 = (1.0 / params.r) * complex(math.cos(-params.theta), math.sin(-params.theta))
    while len(cache) <= -k:
        w, p = cache[-1]
        cache.append((w * w1, p / params.lam))
    return cache[-k]


def local_matrix(params: SaddleFocusParams, k: int) -> Array:
    """3x3 matrix of L^k acting on (x, y, t)."""
    w, p = local_powers(params, k)
    return np.array(
        [
            [w.real, -w.imag, 0.0],
            [w.imag, w.real, 0.0],
            [0.0, 0.0, p],
        ]
    )


# --------------------------------------------------------------------------
# point maps


def local_map(system: SystemSpec, points: Array, k: int = 1) -> Array:
    """Apply L^k to points of shape (..., 3)."""
    points = np.asarray(points, dtype=float)
    w, p = local_powers(system.local, k)
    z = (points[..., 0] + 1j * points[..., 1]) * w
    out = np.empty_like(points)
    out[..., 0] = z.real
    out[..., 1] = z.imag
    out[..., 2] = points[..., 2] * p
    return out


def to_input_chart(system: SystemSpec, points: Array) -> Array:
    """Tangency-adapted input coordinates (u, v, s) of the transition map."""
    points = np.asarray(points, dtype=float)
    tr = system.transition
    w = (points[..., 0] + 1j * points[..., 1] - tr.q_z) * complex(math.cos(-system.beta), math.sin(-system.beta))
    out = np.empty_like(points)
    out[..., 0] = w.real
    out[..., 1] = w.imag
    out[..., 2] = points[..., 2]
    return out


def global_map(system: SystemSpec, points: Array, check: bool = True) -> Array:
    """Apply the transition map to points of shape (..., 3)."""
    tr = system.transition
    uvs = to_input_chart(system, points)
    if check:
        rad = np.hypot(uvs[..., 0], uvs[..., 1])
        if np.any(rad > tr.patch_radius * (1.0 + 1e-12)):
            raise DomainError("transition map input outside its patch")
    u = uvs[..., 0]
    v = uvs[..., 1]
    s = uvs[..., 2]
    x_out = tr.c * u * u + tr.d * u * v + tr.e * v * v + tr.eps * s
    y_out = tr.b * v
    zc = (x_out + 1j * y_out) * complex(math.cos(tr.psi), math.sin(tr.psi))
    out = np.empty_like(uvs)
    out[..., 0] = zc.real
    out[..., 1] = zc.imag
    out[..., 2] = tr.t0 + tr.g * u
    return out


def global_map_inverse(system: SystemSpec, points: Array, check: bool = True) -> Array:
    """Invert the transition map on points of shape (..., 3)."""
    tr = system.transition
    points = np.asarray(points, dtype=float)
    zc = (points[..., 0] + 1j * points[..., 1]) * complex(math.cos(-tr.psi), math.sin(-tr.psi))
    x = zc.real
    y = zc.imag
    v = y / tr.b
    u = (points[..., 2] - tr.t0) / tr.g
    s = (x - tr.c * u * u - tr.d * u * v - tr.e * v * v) / tr.eps
    w = (u + 1j * v) * complex(math.cos(system.beta), math.sin(system.beta)) + tr.q_z
    out = np.empty_like(points)
    out[..., 0] = w.real
    out[..., 1] = w.imag
    out[..., 2] = s
    if check:
        rad = np.hypot(u, v)
        if np.any(rad > tr.patch_radius * (1.0 + 1e-12)):
            raise DomainError("transition map preimage outside its patch")
    return out


# --------------------------------------------------------------------------
# jets along words


def base_chart_jet(system: SystemSpec, params: Array, mode: str = MODE_FULL) -> Jet2:
    """Jet of the base-plane chart (u, v) -> (q_z + e^{i beta}(u + iv), 0).

    Surface pieces are parameterized over this chart of the local unstable
    plane around the tangency point.
    """
    tr = system.transition
    cb = math.cos(system.beta)
    sb = math.sin(system.beta)
    origin = np.array([tr.q_z.real, tr.q_z.imag, 0.0])
    basis = np.array([[cb, -sb], [sb, cb], [0.0, 0.0]])
    return affine_jet(np.asarray(params, dtype=float), origin, basis, mode)


def base_chart_point(system: SystemSpec, params: Array) -> Array:
    return base_chart_jet(system, params, MODE_VALUE).value


def _global_jet(system: SystemSpec, jet: Jet2) -> Jet2:
    """Push a jet through the transition map (no domain check)."""
    tr = system.transition
    cb = math.cos(system.beta)
    sb = math.sin(system.beta)
    # rows of the input chart: u = (cos b, sin b), v = (-sin b, cos b)
    m_in = np.array([[cb, sb, 0.0], [-sb, cb, 0.0], [0.0, 0.0, 1.0]])
    off_in = m_in @ np.array([-tr.q_z.real, -tr.q_z.imag, 0.0])
    chart = push_linear(jet, m_in, off_in)
    u = chart.value[..., 0]
    v = chart.value[..., 1]
    s = chart.value[..., 2]
    value = np.empty_like(chart.value)
    value[..., 0] = tr.c * u * u + tr.d * u * v + tr.e * v * v + tr.eps * s
    value[..., 1] = tr.b * v
    value[..., 2] = tr.t0 + tr.g * u
    if chart.jac is None:
        core = Jet2(value)
    else:
        dg = np.zeros(chart.value.shape[:-1] + (3, 3))
        dg[..., 0, 0] = 2.0 * tr.c * u + tr.d * v
        dg[..., 0, 1] = tr.d * u + 2.0 * tr.e * v
        dg[..., 0, 2] = tr.eps
        dg[..., 1, 1] = tr.b
        dg[..., 2, 0] = tr.g
        d2g = np.zeros((3, 3, 3))
        d2g[0, 0, 0] = 2.0 * tr.c
        d2g[0, 0, 1] = tr.d
        d2g[0, 1, 0] = tr.d
        d2g[0, 1, 1] = 2.0 * tr.e
        core = push_smooth(chart, value, dg, d2g)
    cp = math.cos(tr.psi)
    sp = math.sin(tr.psi)
    m_out = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    if tr.psi == 0.0:
        return core
    return push_linear(core, m_out)


def _global_jet_from_base(system: SystemSpec, params: Array, mode: str = MODE_FULL) -> Jet2:
    """Jet of (transition o base chart), evaluated directly on base parameters.

    The base chart inverts the transition's input chart exactly, so the
    composition is the transition polynomial in the parameters themselves
    (with s = 0 on the base plane).  Evaluating in this fused form skips the
    ambient embedding round-trip, whose rounding at the magnitude of q_z
    would otherwise dominate the parameter resolution of deep fold windows.
    """
    tr = system.transition
    params = np.asarray(params, dtype=float)
    u = params[..., 0]
    v = params[..., 1]
    value = np.empty(params.shape[:-1] + (3,))
    value[..., 0] = tr.c * u * u + tr.d * u * v + tr.e * v * v
    value[..., 1] = tr.b * v
    value[..., 2] = tr.t0 + tr.g * u
    if mode == MODE_VALUE:
        core = Jet2(value)
    else:
        jac = np.zeros(params.shape[:-1] + (3, 2))
        jac[..., 0, 0] = 2.0 * tr.c * u + tr.d * v
        jac[..., 0, 1] = tr.d * u + 2.0 * tr.e * v
        jac[..., 1, 1] = tr.b
        jac[..., 2, 0] = tr.g
        hess = None
        if mode == MODE_FULL:
            hess = np.zeros(params.shape[:-1] + (3, 2, 2))
            hess[..., 0, 0, 0] = 2.0 * tr.c
            hess[..., 0, 0, 1] = tr.d
            hess[..., 0, 1, 0] = tr.d
            hess[..., 0, 1, 1] = 2.0 * tr.e
        core = Jet2(value, jac, hess)
    if tr.psi == 0.0:
        return core
    cp = math.cos(tr.psi)
    sp = math.sin(tr.psi)
    m_out = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    return push_linear(core, m_out)


def _global_jet_from_graph(system: SystemSpec, params: Array, height, mode: str) -> Jet2:
    """Jet of (transition o graph chart) on base parameters, fused like
    _global_jet_from_base but with the surface height s(u, v) and its
    derivatives folded into the x output channel."""
    tr = system.transition
    params = np.asarray(params, dtype=float)
    s, ds, d2s = height(params, mode)
    u = params[..., 0]
    v = params[..., 1]
    value = np.empty(params.shape[:-1] + (3,))
    value[..., 0] = tr.c * u * u + tr.d * u * v + tr.e * v * v + tr.eps * s
    value[..., 1] = tr.b * v
    value[..., 2] = tr.t0 + tr.g * u
    if mode == MODE_VALUE:
        core = Jet2(value)
    else:
        jac = np.zeros(params.shape[:-1] + (3, 2))
        jac[..., 0, 0] = 2.0 * tr.c * u + tr.d * v
        jac[..., 0, 1] = tr.d * u + 2.0 * tr.e * v
        jac[..., 0, :] += tr.eps * ds
        jac[..., 1, 1] = tr.b
        jac[..., 2, 0] = tr.g
        hess = None
        if mode == MODE_FULL:
            hess = np.zeros(params.shape[:-1] + (3, 2, 2))
            hess[..., 0, 0, 0] = 2.0 * tr.c
            hess[..., 0, 0, 1] = tr.d
            hess[..., 0, 1, 0] = tr.d
            hess[..., 0, 1, 1] = 2.0 * tr.e
            hess[..., 0, :, :] += tr.eps * d2s
        core = Jet2(value, jac, hess)
    if tr.psi == 0.0:
        return core
    cp = math.cos(tr.psi)
    sp = math.sin(tr.psi)
    m_out = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    return push_linear(core, m_out)


def evaluate_word(
    system: SystemSpec,
    word: tuple[Atom, ...],
    params: Array,
    mode: str = MODE_FULL,
    check: bool = True,
    height=None,
) -> Jet2:
    """Jet of the composed chart word applied to the base-plane chart.

    ``params`` are base chart coordinates of shape (..., 2).  With
    ``check`` enabled, a transition atom whose input leaves the patch
    raises WordDomainError; mask-building callers disable the check and
    evaluate domain constraints themselves via word_trace.

    ``height``, when given, is a callable (params, mode) -> (s, ds, d2s)
    describing a surface graph t = s(u, v) over the patch chart; the word
    then acts on that graph instead of the base plane.  Only words opening
    with a transition atom support a graph base.
    """
    tr = system.transition
    start = 0
    if word and word[0][0] == ATOM_GLOBAL:
        params = np.asarray(params, dtype=float)
        if check:
            rad = np.hypot(params[..., 0], params[..., 1])
            if np.any(rad > tr.patch_radius * (1.0 + 1e-12)):
                raise WordDomainError(0, "input left the transition patch")
        if height is None:
            jet = _global_jet_from_base(system, params, mode)
        else:
            jet = _global_jet_from_graph(system, params, height, mode)
        start = 1
    elif height is not None:
        raise ValueError("a height graph requires a word opening with a transition atom")
    else:
        jet = base_chart_jet(system, params, mode)
    for index in range(start, len(word)):
        kind, k = word[index]
        if kind == ATOM_LOCAL:
            jet = push_linear(jet, local_matrix(system.local, k))
        elif kind == ATOM_GLOBAL:
            if check:
                off = jet.planar_complex - tr.q_z
                if np.any(np.abs(off) > tr.patch_radius * (1.0 + 1e-12)):
                    raise WordDomainError(index, "input left the transition patch")
            jet = _global_jet(system, jet)
        else:
            raise ValueError(f"unknown atom kind {kind!r}")
    return jet


def word_trace(
    system: SystemSpec, word: tuple[Atom, ...], params: Array, height=None
) -> list[Array]:
    """Values after each atom (prefix orbit), without domain checks.

    Index 0 is the base chart embedding; index i > 0 the value after the
    first i atoms.  Used to evaluate per-prefix domain constraints.
    """
    value = base_chart_jet(system, params, MODE_VALUE).value
    if height is not None:
        value = value.copy()
        value[..., 2], _, _ = height(np.asarray(params, dtype=float), MODE_VALUE)
    out = [value]
    for kind, k in word:
        if kind == ATOM_LOCAL:
            value = local_map(system, value, k)
        else:
            value = global_map(system, value, check=False)
        out.append(value)
    return out


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    rational_rotation: bool
    rotation_fraction: tuple[int, int] | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[Check, ...]:
        return tuple(c for c in self.checks if not c.passed)


def rotation_rationality(theta: float, max_den: int = 10**6, tol: float = 1e-12) -> tuple[int, int] | None:
    """Best rational approximation p/q (q <= max_den) of theta / 2pi, if it
    is within tol; None when the rotation is numerically irrational."""
    x = (theta / TWO_PI) % 1.0
    frac = Fraction(x).limit_denominator(max_den)
    if abs(x - float(frac)) < tol:
        return (frac.numerator, frac.denominator)
    return None


def validate_params(system: SystemSpec) -> ValidationReport:
    """Structured parameter validation; collects failures, never raises."""
    lo = system.local
    tr = system.transition
    trips = system.trips
    checks: list[Check] = []

    def add(name: str, passed: bool, detail: str) -> None:
        checks.append(Check(name, bool(passed), detail))

    add("planar-expansion", lo.r > 1.0, f"r = {lo.r}")
    add("vertical-contraction", 0.0 < lo.lam < 1.0, f"lambda = {lo.lam}")
    add("chart-radius", lo.a > 0.0, f"a = {lo.a}")
    add(
        "patch-inside-chart",
        abs(tr.q_z) + tr.patch_radius < lo.a,
        f"|q_z| + patch_radius = {abs(tr.q_z) + tr.patch_radius} vs a = {lo.a}",
    )
    add("patch-off-axis", abs(tr.q_z) - tr.patch_radius > 0.0, f"|q_z| = {abs(tr.q_z)}")
    add("axis-image-height", 0.0 < tr.t0 < lo.a, f"t0 = {tr.t0}")
    add("patch-radius-positive", tr.patch_radius > 0.0, f"patch_radius = {tr.patch_radius}")
    add("quadratic-coefficient", abs(tr.c) > 1e-6, f"c = {tr.c}")
    add("height-coupling", abs(tr.eps) > 1e-12, f"eps = {tr.eps}")
    add("fold-shear-b", tr.b != 0.0, f"b = {tr.b}")
    add("axis-shear-g", tr.g != 0.0, f"g = {tr.g}")
    add("trip-n0-positive", trips.n0 > 0, f"n0 = {trips.n0}")
    add("trip-j-positive", trips.j > 0, f"j = {trips.j}")
    add("trip-u", trips.u >= 0, f"u = {trips.u} (0 = auto)")
    add("trip-m0", trips.m0 >= 0, f"m0 = {trips.m0} (0 = auto)")

    tangency_ok = False
    detail = "not evaluated"
    if abs(tr.c) > 0 and tr.patch_radius > 0:
        try:
            jet = evaluate_word(system, (WORD_GLOBAL,), np.zeros(2))
            phi, grad, hess = graph_probe(jet)
            # graph normal form over ambient (y, t): solving y = 0 through
            # the psi-rotated output frame scales the quadratic coefficient
            # to 2c / (g^2 cos psi)
            expected = 2.0 * tr.c / (tr.g * tr.g * math.cos(tr.psi))
            tangency_ok = abs(phi) < 1e-12 and abs(grad[1]) < 1e-12 and abs(hess[1, 1] - expected) < 1e-9 * max(1.0, abs(expected))
            detail = f"phi = {phi:.3e}, dphi/dt = {grad[1]:.3e}, d2phi/dt2 = {hess[1, 1]:.6e}"
        except DomainError as exc:
            detail = str(exc)
    add("quadratic-tangency-at-axis", tangency_ok, detail)

    frac = rotation_rationality(lo.theta)
    return ValidationReport(tuple(checks), frac is not None, frac)


def graph_probe(jet: Jet2) -> tuple[float, Array, Array]:
    """Scalar graph data x = phi(y, t) at a single-point jet."""
    from .jets import graph_over_vertical

    phi, grad, hess = graph_over_vertical(jet)
    return float(phi), np.asarray(grad, dtype=float), np.asarray(hess, dtype=float)


def check_positively_associated(system: SystemSpec) -> bool:
    """Whether the local stable curve leaves on the same vertical side of
    the unstable plane as the forward orbit of the tangency image.

    The stable curve through q is the transition preimage of the stable
    axis; its height at chart parameter tau is -c tau^2 / eps.  The forward
    orbit of q_hat = (0, t0) has heights lambda^k t0 > 0, so the pair is
    positively associated exactly when -c / eps > 0.
    """
    tr = system.transition
    return (-tr.c / tr.eps) > 0.0 and tr.t0 > 0.0


def stable_curve_point(system: SystemSpec, tau: Array) -> Array:
    """The local stable curve kappa(tau) = transition^{-1}(stable axis).

    kappa(tau) = (q_z + tau e^{i beta}, -c tau^2 / eps); its image under
    the transition map is (0, t0 + g tau) on the stable axis.
    """
    tau = np.asarray(tau, dtype=float)
    tr = system.transition
    w = tr.q_z + tau * complex(math.cos(system.beta), math.sin(system.beta))
    out = np.empty(tau.shape + (3,))
    out[..., 0] = np.real(w)
    out[..., 1] = np.imag(w)
    out[..., 2] = -tr.c * tau * tau / tr.eps
    return out


def stable_curve_velocity(system: SystemSpec, tau: Array) -> Array:
    tau = np.asarray(tau, dtype=float)
    tr = system.transition
    out = np.empty(tau.shape + (3,))
    out[..., 0] = math.cos(system.beta)
    out[..., 1] = math.sin(system.beta)
    out[..., 2] = -2.0 * tr.c * tau / tr.eps
    return out


# --------------------------------------------------------------------------
# conjugation


@dataclass(frozen=True)
class ConjugacyMap:
    """Linear conformal conjugation (z, t) -> (rho e^{i omega} M z, mu t),
    where M is complex conjugation when mirror is set."""

    rho: float = 1.0
    omega: float = 0.0
    mu: float = 1.0
    mirror: bool = False

    @property
    def planar_factor(self) -> complex:
        return self.rho * complex(math.cos(self.omega), math.sin(self.omega))

    def apply_planar(self, z: Array) -> Array:
        z = np.conj(z) if self.mirror else np.asarray(z)
        return self.planar_factor * z

    def apply(self, points: Array) -> Array:
        points = np.asarray(points, dtype=float)
        z = points[..., 0] + 1j * points[..., 1]
        z = self.apply_planar(z)
        out = np.empty_like(points)
        out[..., 0] = z.real
        out[..., 1] = z.imag
        out[..., 2] = self.mu * points[..., 2]
        return out

    def inverse(self) -> "ConjugacyMap":
        if self.mirror:
            # (mirror then scale)^{-1} = mirror then scale by conj factor
            return ConjugacyMap(1.0 / self.rho, self.omega, 1.0 / self.mu, True)
        return ConjugacyMap(1.0 / self.rho, -self.omega, 1.0 / self.mu, False)


def _mirror_params(tr: GlobalMapParams) -> GlobalMapParams:
    return replace(tr, q_z=tr.q_z.conjugate(), d=-tr.d, psi=-tr.psi)


def make_conjugate_system(
    system: SystemSpec,
    rho: float = 1.0,
    omega: float = 0.0,
    mu: float = 1.0,
    mirror: bool = False,
    label: str | None = None,
) -> tuple[SystemSpec, ConjugacyMap]:
    """Conjugated system Phi f Phi^{-1} together with the conjugation Phi.

    The transformed parameters satisfy the conjugation identity exactly:
    the new system evaluated at Phi(p) equals Phi(f(p)) for every p in the
    transported domain.  Raises DomainError when the transported patch or
    axis image leave the transported chart.
    """
    if rho <= 0 or mu <= 0:
        raise DomainError("conjugation scales rho, mu must be positive")
    lo = system.local
    tr = system.transition
    theta = lo.theta
    if mirror:
        theta = -theta
        tr = _mirror_params(tr)
    factor = rho * complex(math.cos(omega), math.sin(omega))
    new_local = SaddleFocusParams(r=lo.r, theta=theta, lam=lo.lam, a=min(rho, mu) * lo.a)
    new_tr = GlobalMapParams(
        q_z=factor * tr.q_z,
        t0=mu * tr.t0,
        c=tr.c / rho,
        d=tr.d / rho,
        e=tr.e / rho,
        eps=rho * tr.eps / mu,
        patch_radius=rho * tr.patch_radius,
        psi=tr.psi + omega,
        b=tr.b,
        g=(mu / rho) * tr.g,
    )
    new_system = SystemSpec(
        local=new_local,
        transition=new_tr,
        trips=system.trips,
        label=label if label is not None else f"{system.label}-conj",
    )
    conj = ConjugacyMap(rho, omega, mu, mirror)
    report = validate_params(new_system)
    hard = [c for c in report.failures if c.name in ("patch-inside-chart", "axis-image-height", "patch-off-axis")]
    if hard:
        raise DomainError("conjugated system leaves its chart: " + "; ".join(c.name for c in hard))
    return new_system, conj


# --------------------------------------------------------------------------
# serialization (base family only)

CONFIG_KEYS = (
    "r",
    "theta",
    "lambda",
    "a",
    "q_re",
    "q_im",
    "t0",
    "c",
    "eps",
    "d",
    "e",
    "patch_radius",
    "n0",
    "u",
    "j",
    "m0",
)


def system_to_dict(system: SystemSpec) -> dict[str, float | int]:
    """Flat mapping with the config-file keys.  Restricted to the base
    family; conjugated systems live in memory only."""
    tr = system.transition
    if not tr.is_base:
        raise ValueError("only base-family systems are serializable")
    lo = system.local
    trips = system.trips
    return {
        "r": lo.r,
        "theta": lo.theta,
        "lambda": lo.lam,
        "a": lo.a,
        "q_re": tr.q_z.real,
        "q_im": tr.q_z.imag,
        "t0": tr.t0,
        "c": tr.c,
        "eps": tr.eps,
        "d": tr.d,
        "e": tr.e,
        "patch_radius": tr.patch_radius,
        "n0": trips.n0,
        "u": trips.u,
        "j": trips.j,
        "m0": trips.m0,
    }


def system_from_dict(data: dict[str, float], label: str = "system") -> SystemSpec:
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown system keys: {sorted(unknown)}")
    get = lambda key, default: float(data.get(key, default))
    local = SaddleFocusParams(
        r=get("r", 1.5), theta=get("theta", 1.0), lam=get("lambda", 0.4), a=get("a", 1.0)
    )
    tr = GlobalMapParams(
        q_z=complex(get("q_re", 0.5), get("q_im", 0.0)),
        t0=get("t0", 0.5),
        c=get("c", 1.0),
        eps=get("eps", -1.0),
        d=get("d", 0.0),
        e=get("e", 0.0),
        patch_radius=get("patch_radius", 0.2),
    )
    trips = TripIntegers(
        n0=int(data.get("n0", 8)),
        u=int(data.get("u", 0)),
        j=int(data.get("j", 1)),
        m0=int(data.get("m0", 0)),
    )
    return SystemSpec(local=local, transition=tr, trips=trips, label=label)
