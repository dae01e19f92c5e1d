"""Conjugacy candidates between model pairs and their verification.

A linear conformal candidate is recovered from the tangency points once
the moduli agree; segment transport, diameter equivariance, angle
differences, and the epsilon-neighborhood property are then checked
against that candidate.  Non-conjugacy verdicts come solely from moduli
mismatches: the checks refute, they never prove.

Functions taking pipelines expect the provider interface documented in
moduli.py plus ``limit_segments()``, ``xi_segments()``, and ``moduli()``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PlanError, SflabError
from .geometry import OrientedSegment, point_to_polyline, wrap_angle
from .folds import FoldCurve, rotated_fold
from .moduli import ModuliEstimate, SegmentFamily, SubsequencePlan

Array = np.ndarray

MODULI_ORDER = ("lambda", "r", "theta", "ratio", "cross_ratio")


@dataclass(frozen=True)
class LinearConformalMap:
    """Planar map z -> rho e^{i omega} z, conjugating the chart planes.

    The reversing variant conjugates first: z -> rho e^{i omega} conj(z).
    """

    rho: float
    omega: float
    orientation: str = "preserving"

    def __post_init__(self) -> None:
        if self.rho <= 0.0:
            raise ValueError("conformal scale must be positive")
        if self.orientation not in ("preserving", "reversing"):
            raise ValueError("orientation must be 'preserving' or 'reversing'")

    @property
    def reversing(self) -> bool:
        return self.orientation == "reversing"

    @property
    def factor(self) -> complex:
        return self.rho * complex(math.cos(self.omega), math.sin(self.omega))

    def apply_complex(self, z: complex | Array):
        if self.reversing:
            z = np.conjugate(z) if isinstance(z, np.ndarray) else z.conjugate()
        return self.factor * z

    def apply_angle(self, angle: float) -> float:
        if self.reversing:
            return float(wrap_angle(self.omega - angle))
        return float(wrap_angle(self.omega + angle))

    def apply_segment(self, seg: OrientedSegment) -> OrientedSegment:
        foot = self.apply_complex(seg.foot)
        angle = self.apply_angle(seg.angle)
        return OrientedSegment(foot, angle, self.rho * seg.half_length)

    def to_json_dict(self) -> dict:
        return {"rho": self.rho, "omega": self.omega, "orientation": self.orientation}


@dataclass(frozen=True)
class PairReport:
    """Moduli comparison of two systems with the candidate map, if any."""

    verdict: str
    violated_modulus: str | None
    residuals: dict
    candidate: LinearConformalMap | None
    moduli_f: ModuliEstimate
    moduli_g: ModuliEstimate

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "violated_modulus": self.violated_modulus,
            "residuals": dict(self.residuals),
            "candidate": None if self.candidate is None else self.candidate.to_json_dict(),
        }


@dataclass(frozen=True)
class CheckReport:
    """Rows of (label, index, residual) with a shared tolerance."""

    kind: str
    rows: tuple[tuple[str, int, float], ...]
    tol: float
    notes: tuple[str, ...] = ()

    @property
    def max_residual(self) -> float:
        return max((row[2] for row in self.rows), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_residual < self.tol


# --------------------------------------------------------------------------
# moduli comparison


def _joint_bar(a: float | None, b: float | None, floor: float) -> float:
    return (a or 0.0) + (b or 0.0) + floor


def _moduli_comparison(
    mf: ModuliEstimate, mg: ModuliEstimate
) -> tuple[str | None, dict, str]:
    """First violated modulus, residual table, and the orientation branch."""
    residuals: dict = {}
    violated: str | None = None

    orientation = "preserving"
    if mf.theta_hat.ok and mg.theta_hat.ok:
        same = abs(wrap_angle(mf.theta_hat.value - mg.theta_hat.value))
        mirrored = abs(wrap_angle(mf.theta_hat.value + mg.theta_hat.value))
        if mirrored < same:
            orientation = "reversing"

    def check(name: str, residual: float, bar: float) -> None:
        nonlocal violated
        residuals[name] = residual
        if violated is None and residual > bar:
            violated = name

    if mf.lambda_hat.ok and mg.lambda_hat.ok:
        check(
            "lambda",
            abs(mf.lambda_hat.value - mg.lambda_hat.value),
            _joint_bar(mf.lambda_hat.error, mg.lambda_hat.error, 1e-9),
        )
    if mf.r_hat.ok and mg.r_hat.ok:
        check(
            "r",
            abs(mf.r_hat.value - mg.r_hat.value),
            _joint_bar(mf.r_hat.error, mg.r_hat.error, 1e-9),
        )
    if mf.theta_hat.ok and mg.theta_hat.ok:
        same = abs(wrap_angle(mf.theta_hat.value - mg.theta_hat.value))
        mirrored = abs(wrap_angle(mf.theta_hat.value + mg.theta_hat.value))
        check(
            "theta",
            min(same, mirrored),
            _joint_bar(mf.theta_hat.error, mg.theta_hat.error, 1e-9),
        )
    if mf.ratio_hat.ok and mg.ratio_hat.ok:
        check(
            "ratio",
            abs(mf.ratio_hat.value - mg.ratio_hat.value),
            _joint_bar(mf.ratio_hat.error, mg.ratio_hat.error, 1e-9),
        )
    if mf.cross_ratio is not None and mg.cross_ratio is not None:
        other = mg.cross_ratio.conjugate() if orientation == "reversing" else mg.cross_ratio
        check(
            "cross_ratio",
            abs(mf.cross_ratio - other),
            1e-9 * max(1.0, abs(mf.cross_ratio)),
        )
    return violated, residuals, orientation


def recover_conjugacy(pf, pg) -> LinearConformalMap:
    """Recover the unique linear conformal candidate for a pair.

    The moduli must agree within joint error bars; the candidate then
    maps tangency point to tangency point, which pins scale and angle,
    and the rotation branch picks the orientation.
    """
    violated, _residuals, orientation = _moduli_comparison(pf.moduli(), pg.moduli())
    if violated is not None:
        raise DomainError(f"no conjugacy candidate: modulus {violated} differs")
    q_f = pf.system.transition.q_z
    q_g = pg.system.transition.q_z
    rho = abs(q_g) / abs(q_f)
    if orientation == "reversing":
        omega = float(wrap_angle(np.angle(q_g) + np.angle(q_f)))
    else:
        omega = float(wrap_angle(np.angle(q_g) - np.angle(q_f)))
    return LinearConformalMap(rho=rho, omega=omega, orientation=orientation)


def compare_moduli(pf, pg) -> PairReport:
    """Verdict on conjugacy necessary conditions for a pair of systems.

    "consistent" never claims conjugacy; "violated" names the first
    modulus differing beyond the joint error bars.
    """
    mf = pf.moduli()
    mg = pg.moduli()
    violated, residuals, orientation = _moduli_comparison(mf, mg)
    candidate: LinearConformalMap | None = None
    if violated is None:
        q_f = pf.system.transition.q_z
        q_g = pg.system.transition.q_z
        rho = abs(q_g) / abs(q_f)
        if orientation == "reversing":
            omega = float(wrap_angle(np.angle(q_g) + np.angle(q_f)))
        else:
            omega = float(wrap_angle(np.angle(q_g) - np.angle(q_f)))
        candidate = LinearConformalMap(rho=rho, omega=omega, orientation=orientation)
    return PairReport(
        verdict="consistent" if violated is None else "violated",
        violated_modulus=violated,
        residuals=residuals,
        candidate=candidate,
        moduli_f=mf,
        moduli_g=mg,
    )


# --------------------------------------------------------------------------
# segment transport


def _segment_chord(seg: OrientedSegment, radius: float) -> OrientedSegment | None:
    """The part of the segment's line inside the disk of the radius."""
    d = abs(seg.foot)
    if d >= radius:
        return None
    half = math.sqrt(radius * radius - d * d)
    return OrientedSegment(seg.foot, seg.angle, half)


def _segment_distance(seg_a: OrientedSegment, seg_b: OrientedSegment, samples: int = 129) -> float:
    pa = seg_a.sample(samples).points
    pb = seg_b.sample(samples).points
    d_ab = float(np.max(point_to_polyline(pa, pb[[0, -1]])))
    d_ba = float(np.max(point_to_polyline(pb, pa[[0, -1]])))
    return max(d_ab, d_ba)


def verify_segment_transport(
    h: LinearConformalMap,
    pf,
    pg,
    plan: SubsequencePlan | None = None,
    tol: float = 1e-6,
    strict: bool = True,
) -> CheckReport:
    """Check that h carries each fitted segment onto the primed one.

    Rows cover the parallel family gamma_k and the rotated family xi_k
    over the jointly computed range; the residual is the symmetric
    distance between h(segment) clipped to the primed chart and the
    independently fitted primed segment.
    """
    del plan  # the shared plan is fixed by the pair pipelines
    a_g = pg.system.local.a
    rows: list[tuple[str, int, float]] = []
    notes: list[str] = []

    _g0_f, fam_f = pf.limit_segments()
    _g0_g, fam_g = pg.limit_segments()
    xi_f = pf.xi_segments()
    xi_g = pg.xi_segments()

    def add(kind: str, family_f: SegmentFamily, family_g: SegmentFamily) -> None:
        count = min(len(family_f), len(family_g))
        if len(family_f) != len(family_g):
            notes.append(
                f"{kind} families have different lengths"
                f" ({len(family_f)} vs {len(family_g)}); comparing {count}"
            )
        for k in range(count):
            image = h.apply_segment(family_f.segments[k].segment)
            clipped = _segment_chord(image, a_g)
            if clipped is None:
                rows.append((kind, k, math.inf))
                continue
            target = family_g.segments[k].segment
            rows.append((kind, k, _segment_distance(clipped, target)))

    add("gamma", fam_f, fam_g)
    add("xi", xi_f, xi_g)

    report = CheckReport(kind="transport", rows=tuple(rows), tol=tol, notes=tuple(notes))
    if strict and not report.ok:
        worst = max(report.rows, key=lambda row: row[2])
        raise SflabError(f"transport violated at k = {worst[1]} ({worst[0]} family)")
    return report


def verify_equivariance(
    h: LinearConformalMap,
    pf,
    pg,
    n_max: int = 50,
    tol: float = 1e-8,
) -> CheckReport:
    """Check h-equivariance of the limit diameter under local rotations.

    The limit diameter angle is the fitted limit-segment angle; the n-th
    rotated diameter must map onto the primed n-th rotated diameter.
    Oriented angles are compared, with exact half-turn flips recorded
    rather than failed.
    """
    theta_f = pf.system.local.theta
    theta_g = pg.system.local.theta
    psi_f = pf.limit_segments()[0].angle
    psi_g = pg.limit_segments()[0].angle
    rows: list[tuple[str, int, float]] = []
    flips = 0
    for n in range(n_max + 1):
        image = h.apply_angle(psi_f + n * theta_f)
        target = psi_g + n * theta_g
        direct = abs(wrap_angle(image - target))
        flipped = abs(wrap_angle(image - target - math.pi))
        if flipped < direct:
            flips += 1
            rows.append(("diameter", n, flipped))
        else:
            rows.append(("diameter", n, direct))
    notes = ()
    if flips:
        notes = (f"orientation flipped by a half turn on {flips} rows",)
    return CheckReport(kind="equivariance", rows=tuple(rows), tol=tol, notes=notes)


def verify_angle_differences(
    h: LinearConformalMap,
    diameter_pairs,
    tol: float = 1e-8,
) -> CheckReport:
    """Check preservation of angle differences across matched diameters.

    Each entry is ((l1, l2), (l1', l2')) of angles; a reversing map
    negates differences.  The residual is the wrapped mismatch.
    """
    rows: list[tuple[str, int, float]] = []
    for index, ((l1, l2), (l1p, l2p)) in enumerate(diameter_pairs):
        diff = wrap_angle(l2 - l1)
        diff_p = wrap_angle(l2p - l1p)
        expected = -diff if h.reversing else diff
        rows.append(("pair", index, abs(wrap_angle(diff_p - expected))))
    return CheckReport(kind="angle-differences", rows=tuple(rows), tol=tol)


def orthogonality_check(
    h: LinearConformalMap,
    xi_angle: float,
    base_angle: float,
    xi_angle_p: float,
    base_angle_p: float,
    tol: float = 1e-8,
) -> CheckReport:
    """Check that a right angle between matched diameters is preserved."""
    diff = abs(wrap_angle(xi_angle - base_angle))
    diff_p = abs(wrap_angle(xi_angle_p - base_angle_p))
    rows = (
        ("right-angle", 0, abs(diff - math.pi / 2.0)),
        ("right-angle", 1, abs(diff_p - math.pi / 2.0)),
    )
    return CheckReport(kind="orthogonality", rows=rows, tol=tol)


# --------------------------------------------------------------------------
# epsilon neighborhoods


def _point_to_polyline_3d(points: Array, poly: Array) -> Array:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(poly, dtype=float)
    a = poly[:-1]
    ab = poly[1:] - a
    ab2 = np.sum(ab * ab, axis=1)
    ab2 = np.where(ab2 > 0.0, ab2, 1.0)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("mnk,nk->mn", ap, ab) / ab2[None, :], 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - closest, axis=2)
    return np.min(d, axis=1)


def epsilon_neighborhood_check(
    h: LinearConformalMap,
    pf,
    pg,
    j: int,
    eps: float,
    mu: float | None = None,
) -> tuple[bool, float, str | None]:
    """Check that the h-image of the j-th front curve hugs the primed one.

    The comparison runs at the deepest rotation depth both sides resolve
    in floating point; the full-depth statement follows by the exact
    rotation-scaling, which is verified separately.  Returns (ok, margin,
    flag); an epsilon below float noise yields (False, margin, flag)
    rather than an exception.
    """
    plan = pf.shallow_plan()
    if not (0 <= j < len(plan.pairs)):
        raise PlanError(f"index j = {j} out of computed range")
    m_j, n_j = plan.pairs[j]

    master_f, depth_f = pf.plan_master(m_j)
    master_g, depth_g = pg.plan_master(m_j)
    n_cmp = min(n_j, depth_f, depth_g)
    curve_f = rotated_fold(master_f, n_cmp, pf.system.local)
    curve_g = rotated_fold(master_g, n_cmp, pg.system.local)
    assert isinstance(curve_f, FoldCurve) and isinstance(curve_g, FoldCurve)

    if mu is None:
        mu = pg.system.transition.t0 / pf.system.transition.t0

    z = curve_f.points[:, 0] + 1j * curve_f.points[:, 1]
    image_z = h.apply_complex(z)
    image = np.stack([image_z.real, image_z.imag, mu * curve_f.points[:, 2]], axis=-1)

    margin = float(np.max(_point_to_polyline_3d(image, curve_g.points)))
    if eps < 1e-14:
        return False, margin, "epsilon below float noise; the check cannot resolve it"
    return margin < eps, margin, None
