"""Front curves and folding curves of surface pieces.

The vertical projection pr(x, y, t) = (x, y) restricted to a surface piece
degenerates along a curve: the front curve on the surface, whose planar
projection is the folding curve.  The fold condition is the vanishing of
the determinant of the planar Jacobian of the evaluated word, which the
exact 2-jets provide together with its gradient.

Curves are traced by predictor-corrector continuation in the piece's
scaled parameters and trimmed at the clipping radius by bisection.
Rotation-scaling images of a folding curve are computed exactly in the
plane, one complex multiplication per local step, so composed rotations
agree byte for byte with single rotations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import DomainError, FoldError
from .geometry import (
    ClosestPoint,
    PlanarCurve,
    angle_mod_2pi,
    closest_point_and_angle,
    max_curvature,
)
from .jets import MODE_FULL, Jet2, graph_over_vertical, planar_det, planar_det_gradient
from .model import Atom, SaddleFocusParams
from .atlas import SurfacePiece

Array = np.ndarray

_TURN_TARGET = math.radians(2.0)
_TURN_REJECT = math.radians(4.5)
_CORRECTOR_TOL = 1e-13
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class FoldCurve:
    """Front curve of a surface piece with its planar folding curve.

    Points are ordered along the continuation direction.  ``residuals``
    holds the raw fold determinant at the traced parameter points of the
    owning piece; rotation-scaling images carry them unchanged.
    ``rotations`` counts local steps applied on top of the owning word.
    """

    label: str
    word: tuple[Atom, ...]
    xi: Array
    params: Array
    points: Array
    tangents: Array
    residuals: Array
    curvatures: Array
    piece: SurfacePiece | None = field(default=None, repr=False)
    orientation: int = 1
    rotations: int = 0
    notes: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.points)

    @property
    def planar(self) -> PlanarCurve:
        return PlanarCurve(self.points[:, :2].copy(), self.tangents.copy())

    @property
    def heights(self) -> Array:
        return self.points[:, 2]

    def reversed(self) -> "FoldCurve":
        return replace(
            self,
            xi=self.xi[::-1].copy(),
            params=self.params[::-1].copy(),
            points=self.points[::-1].copy(),
            tangents=-self.tangents[::-1],
            residuals=self.residuals[::-1].copy(),
            curvatures=self.curvatures[::-1].copy(),
            orientation=-self.orientation,
        )


@dataclass(frozen=True)
class FoldMetrics:
    """Closest-approach data of one rotation-scaling image of a fold."""

    m: int
    n: int
    distance: float
    angle: float
    curvature: float
    closest: complex
    residual_max: float

    def csv_row(self) -> str:
        return (
            f"{self.m},{self.n},{self.distance!r},{self.angle!r},"
            f"{self.curvature!r},{self.closest.real!r},{self.closest.imag!r},"
            f"{self.residual_max!r}"
        )


FOLD_METRICS_HEADER = "m,n,d_mn,theta_mn,kappa_mn,cx,cy,residual_max"


@dataclass(frozen=True)
class TangencyReport:
    """Graph-normal-form data of a surface piece at one point."""

    phi: float
    phi_t: float
    phi_tt: float
    classification: str
    point: Array

    @property
    def quadratic(self) -> bool:
        return self.classification == "quadratic tangency"


# --------------------------------------------------------------------------
# pointwise fold data


def _jet_at(piece: SurfacePiece, xi: Array) -> Jet2:
    jet = piece.jets(np.asarray(xi, dtype=float)[None, :], MODE_FULL)
    assert jet.jac is not None and jet.hess is not None
    return Jet2(jet.value[0], jet.jac[0], jet.hess[0])


def _fold_data(piece: SurfacePiece, xi: Array) -> tuple[Jet2, float, Array, float]:
    """Jet, fold determinant, its parameter gradient, and a column scale."""
    jet = _jet_at(piece, xi)
    det = float(planar_det(jet))
    grad = np.asarray(planar_det_gradient(jet), dtype=float)
    jac_pl = jet.jac[:2, :]
    scale = float(
        max(np.linalg.norm(jac_pl[:, 0]), np.linalg.norm(jac_pl[:, 1]))
    )
    if scale == 0.0:
        raise FoldError(f"{piece.label}: planar Jacobian vanished during continuation")
    return jet, det, grad, scale


def _correct(
    piece: SurfacePiece,
    xi: Array,
    tol: float,
    max_iter: int = 12,
    max_step: float | None = None,
) -> tuple[Array, Jet2, float, Array] | None:
    """Newton-correct xi onto the fold; None when the iteration fails.

    Convergence is tested on the raw determinant, |det| < tol, matching
    the reported residual.  One Jacobian column shrinks linearly at a
    quadratic fold, so column-relative tests would never trigger.
    """
    xi = np.array(xi, dtype=float)
    for _ in range(max_iter):
        jet, det, grad, scale = _fold_data(piece, xi)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < _DEGENERATE_TOL * scale * scale:
            raise FoldError(
                f"{piece.label}: degenerate fold point near xi = "
                f"({xi[0]:.6g}, {xi[1]:.6g})"
            )
        if abs(det) < tol * max(1.0, scale * scale):
            return xi, jet, det, grad
        step = -det / (grad_norm * grad_norm) * grad
        if max_step is not None and float(np.linalg.norm(step)) > max_step:
            return None
        xi = xi + step
    jet, det, grad, scale = _fold_data(piece, xi)
    if abs(det) < tol * max(1.0, scale * scale):
        return xi, jet, det, grad
    return None


def _tangent_xi(grad: Array) -> Array:
    """Unit parameter tangent of the fold level set (gradient rotated ccw)."""
    t = np.array([-grad[1], grad[0]], dtype=float)
    nrm = float(np.linalg.norm(t))
    return t / nrm


def _planar_tangent(jet: Jet2, tau: Array) -> Array:
    v = jet.jac[:2, :] @ tau
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return np.array([1.0, 0.0])
    return v / nrm


def _exact_curvature(jet: Jet2) -> float:
    """Planar curvature of the folding curve at a fold-point jet.

    At a fold the planar Jacobian has rank one and its range is spanned by
    the curve velocity, so the level-set acceleration term drops out of
    the cross product and the surface 2-jet determines the curvature
    exactly; no third derivatives are needed.
    """
    grad = np.asarray(planar_det_gradient(jet), dtype=float)
    tau = _tangent_xi(grad)
    vel = jet.jac[:2, :] @ tau
    speed = float(np.linalg.norm(vel))
    if speed == 0.0:
        return 0.0
    acc = np.einsum("iab,a,b->i", jet.hess[:2, :, :], tau, tau)
    cross = float(vel[0] * acc[1] - vel[1] * acc[0])
    return abs(cross) / speed**3


def _admissible(piece: SurfacePiece, xi: Array, jet: Jet2, clip_bound: float) -> bool:
    if float(np.max(np.abs(xi))) > 2.0:
        return False
    rad = math.hypot(float(jet.value[0]), float(jet.value[1]))
    if rad > clip_bound * (1.0 + 1e-12):
        return False
    return bool(np.all(piece.constraint_ok(xi[None, :])))


# --------------------------------------------------------------------------
# continuation

_Record = tuple[Array, Jet2, float, Array]


def fold_locus(
    piece: SurfacePiece,
    clip_bound: float | None = None,
    seed_xi: Array | None = None,
    min_samples: int = 64,
    max_samples: int = 4000,
    tol: float = _CORRECTOR_TOL,
) -> FoldCurve:
    """Trace the fold locus of the vertical projection on a piece.

    The curve is continued in both directions from a corrected seed until
    it leaves the piece's admissible set or the planar clipping radius
    ``clip_bound`` (the chart radius by default), with the last step
    bisected onto the boundary.
    """
    a = piece.system.local.a
    bound = a if clip_bound is None else float(clip_bound)

    seeds = [np.zeros(2) if seed_xi is None else np.asarray(seed_xi, dtype=float)]
    for radius in (0.25, 0.6):
        for k in range(8):
            ang = 2.0 * math.pi * (k + 0.5) / 8.0
            seeds.append(seeds[0] + radius * np.array([math.cos(ang), math.sin(ang)]))

    seeded = None
    for candidate in seeds:
        got = _correct(piece, candidate, tol, max_iter=30)
        if got is not None and _admissible(piece, got[0], got[1], bound):
            seeded = got
            break
    if seeded is None:
        raise FoldError(f"{piece.label}: no fold in domain")
    xi0, jet0, det0, grad0 = seeded

    tau0 = _tangent_xi(grad0)
    speed = float(np.linalg.norm(jet0.jac[:2, :] @ tau0))
    if speed == 0.0:
        raise FoldError(f"{piece.label}: fold tangent has no planar image")
    xi_half = min(bound / speed, 1.5)
    h0 = 2.0 * xi_half / float(min_samples)
    h_max = h0
    h_min = max(1e-6 * xi_half, 1e-15)

    notes: list[str] = []

    def bisect_boundary(last_good: _Record, xi_out: Array) -> _Record:
        lo, lo_jet, lo_det, lo_grad = last_good
        hi = xi_out
        for _ in range(60):
            got = _correct(piece, 0.5 * (lo + hi), tol)
            if got is None:
                hi = 0.5 * (lo + hi)
                continue
            mid, mid_jet, mid_det, mid_grad = got
            if _admissible(piece, mid, mid_jet, bound):
                lo, lo_jet, lo_det, lo_grad = mid, mid_jet, mid_det, mid_grad
            else:
                hi = mid
            if float(np.linalg.norm(hi - lo)) < 1e-12 * (1.0 + float(np.linalg.norm(lo))):
                break
        return lo, lo_jet, lo_det, lo_grad

    def march(direction: int) -> list[tuple[Array, Jet2, float, Array]]:
        out: list[tuple[Array, Jet2, float, Array]] = []
        xi = xi0.copy()
        jet, det, grad = jet0, det0, grad0
        tau = direction * tau0
        h = h0
        last_good: _Record = (xi, jet, det, grad)
        for _ in range(max_samples):
            accepted = None
            while True:
                pred = xi + h * tau
                got = _correct(piece, pred, tol, max_step=4.0 * h + 8.0 * h_min)
                if got is not None:
                    xi_n, jet_n, det_n, grad_n = got
                    tau_n = _tangent_xi(grad_n)
                    if float(np.dot(tau_n, tau)) < 0.0:
                        tau_n = -tau_n
                    turn = math.acos(float(np.clip(np.dot(tau_n, tau), -1.0, 1.0)))
                    if turn <= _TURN_REJECT or h <= h_min * 1.0001:
                        accepted = (xi_n, jet_n, det_n, grad_n, tau_n, turn)
                        break
                if h <= h_min * 1.0001:
                    break
                h = max(0.5 * h, h_min)
            if accepted is None:
                notes.append("continuation stalled before the boundary")
                break
            xi_n, jet_n, det_n, grad_n, tau_n, turn = accepted
            if not _admissible(piece, xi_n, jet_n, bound):
                e_xi, e_jet, e_det, e_grad = bisect_boundary(last_good, xi_n)
                tau_b = _tangent_xi(e_grad)
                if float(np.dot(tau_b, tau)) < 0.0:
                    tau_b = -tau_b
                if not (out and np.array_equal(out[-1][0], e_xi)):
                    out.append((e_xi, e_jet, e_det, direction * _planar_tangent(e_jet, tau_b)))
                break
            out.append((xi_n, jet_n, det_n, direction * _planar_tangent(jet_n, tau_n)))
            last_good = (xi_n, jet_n, det_n, grad_n)
            xi, jet, grad, tau = xi_n, jet_n, grad_n, tau_n
            h = float(np.clip(h * np.clip(_TURN_TARGET / max(turn, 1e-9), 0.3, 2.0), h_min, h_max))
        return out

    forward = march(+1)
    backward = march(-1)

    records: list[tuple[Array, Jet2, float, Array]] = []
    for rec in reversed(backward):
        records.append(rec)
    records.append((xi0, jet0, det0, _planar_tangent(jet0, tau0)))
    for rec in forward:
        records.append(rec)

    # drop consecutive duplicates produced by parameter quantization
    kept: list[tuple[Array, Jet2, float, Array]] = []
    for rec in records:
        if kept and np.array_equal(kept[-1][1].value[:2], rec[1].value[:2]):
            continue
        kept.append(rec)
    if len(kept) < 2:
        raise FoldError(f"{piece.label}: fold window collapsed to a single resolvable point")

    xi_arr = np.array([r[0] for r in kept])
    points = np.array([r[1].value for r in kept])
    residuals = np.array([abs(r[2]) for r in kept])
    tangents = np.array([r[3] for r in kept])
    curvatures = np.array([_exact_curvature(r[1]) for r in kept])
    return FoldCurve(
        label=piece.label,
        word=piece.word,
        xi=xi_arr,
        params=piece.params_of(xi_arr),
        points=points,
        tangents=tangents,
        residuals=residuals,
        curvatures=curvatures,
        piece=piece,
        notes=tuple(notes),
    )


# --------------------------------------------------------------------------
# graph normal form


def verify_quadratic_tangency(
    target: Union[SurfacePiece, Jet2],
    at: Array | None = None,
) -> TangencyReport:
    """Classify the graph normal form of a surface at a point.

    ``target`` is a piece (evaluated at parameter ``at``, default the
    center) or a ready jet.  The surface must be a graph x = phi(y, t)
    near the point; the report carries (phi, phi_t, phi_tt).
    """
    if isinstance(target, SurfacePiece):
        xi = np.zeros(2) if at is None else np.asarray(at, dtype=float)
        jet = _jet_at(target, xi)
    else:
        jet = target
        if jet.value.ndim != 1:
            raise ValueError("verify_quadratic_tangency expects a single-point jet")
        if jet.jac is None or jet.hess is None:
            raise ValueError("verify_quadratic_tangency needs a full 2-jet")
    rows = jet.jac[1:, :]
    det = float(rows[0, 0] * rows[1, 1] - rows[0, 1] * rows[1, 0])
    scale = float(np.linalg.norm(rows[0]) * np.linalg.norm(rows[1]))
    if abs(det) <= 1e-12 * max(scale, 1e-300):
        raise DomainError("not locally a graph over the (y, t) coordinates")
    x_val, grad, hess = graph_over_vertical(jet)
    phi = float(x_val)
    phi_t = float(grad[1])
    phi_tt = float(hess[1, 1])
    if abs(phi) <= 1e-10 and abs(phi_t) <= 1e-10:
        if abs(phi_tt) > 1e-6:
            kind = "quadratic tangency"
        else:
            kind = "degenerate tangency"
    else:
        kind = "no tangency"
    return TangencyReport(
        phi=phi, phi_t=phi_t, phi_tt=phi_tt, classification=kind, point=jet.value.copy()
    )


# --------------------------------------------------------------------------
# exact rotation-scaling images


def rotated_fold(
    curve: Union[FoldCurve, PlanarCurve],
    n: int,
    local: SaddleFocusParams,
) -> Union[FoldCurve, PlanarCurve]:
    """Image of a folding curve under n local steps, computed in the plane.

    Points are multiplied by r e^{i theta} once per step (heights by
    lambda), tangents by the unit rotation, so that composing images is
    exactly associative in floating point.
    """
    if n < 0:
        raise ValueError("rotated_fold needs n >= 0")
    unit = complex(math.cos(local.theta), math.sin(local.theta))
    w1 = local.r * unit

    if isinstance(curve, PlanarCurve):
        z = curve.points[:, 0] + 1j * curve.points[:, 1]
        tz = curve.tangents[:, 0] + 1j * curve.tangents[:, 1]
        for _ in range(n):
            z = z * w1
            tz = tz * unit
        return PlanarCurve(
            np.stack([z.real, z.imag], axis=-1),
            np.stack([tz.real, tz.imag], axis=-1),
        )

    z = curve.points[:, 0] + 1j * curve.points[:, 1]
    t = curve.points[:, 2].copy()
    tz = curve.tangents[:, 0] + 1j * curve.tangents[:, 1]
    kap = curve.curvatures.copy()
    for _ in range(n):
        z = z * w1
        t = t * local.lam
        tz = tz * unit
        kap = kap / local.r
    points = np.stack([z.real, z.imag, t], axis=-1)
    tangents = np.stack([tz.real, tz.imag], axis=-1)
    return replace(
        curve, points=points, tangents=tangents, curvatures=kap, rotations=curve.rotations + n
    )


def refined_closest_point(
    master: FoldCurve,
    disk_radius: float,
    uniqueness_scale: float | None = None,
) -> ClosestPoint:
    """Closest approach of a fold curve to the origin, solved on the piece.

    The polyline minimum fixes the branch; when the curve carries its
    owning piece the foot is re-solved on the exact fold by alternating
    the determinant corrector with a tangential Newton step on z . z' = 0.
    Unlike interpolating between samples of magnitude near the sample
    spacing, every quantity here is local to the foot, so the result
    stays relatively accurate when the curve passes the origin many
    orders of magnitude below the spacing.
    """
    cp = closest_point_and_angle(master.planar, disk_radius, uniqueness_scale)
    piece = master.piece
    if piece is None or cp.endpoint or master.rotations != 0:
        return cp
    xi = np.array(master.xi[cp.index], dtype=float)
    z = None
    tangent = None
    converged = False
    for _ in range(30):
        corrected = _correct(piece, xi, _CORRECTOR_TOL)
        if corrected is None:
            return cp
        xi, jet, _det, grad = corrected
        tau = _tangent_xi(grad)
        vel = jet.jac[:2, :] @ tau
        speed = float(np.linalg.norm(vel))
        if speed == 0.0:
            return cp
        tangent = vel / speed
        z = jet.value[:2].copy()
        g = float(z[0] * tangent[0] + z[1] * tangent[1])
        dist = math.hypot(float(z[0]), float(z[1]))
        if abs(g) <= 1e-12 * max(dist, 1e-300):
            converged = True
            break
        xi = xi + (-g / speed) * tau
    if not converged or z is None or tangent is None:
        return cp
    poly_t = master.tangents[cp.index]
    if float(tangent[0] * poly_t[0] + tangent[1] * poly_t[1]) < 0.0:
        tangent = -tangent
    foot = complex(float(z[0]), float(z[1]))
    angle = math.atan2(float(tangent[1]), float(tangent[0]))
    return ClosestPoint(foot, angle, abs(foot), False, cp.index)


def measure_fold(
    master: FoldCurve,
    m: int,
    n: int,
    local: SaddleFocusParams,
    disk_radius: float,
) -> FoldMetrics:
    """Closest-approach metrics of the n-th rotation image of a fold.

    The image is an exact complex scaling of the master, so its closest
    approach is the scaled closest approach of the master.  Measuring on
    the master once and transporting through the scaling keeps the
    distance ratio across n exactly r even at depths where the foot sits
    near the floating-point floor; refining the foot on the scaled
    polyline would re-round the cancellation-heavy arithmetic per n.
    """
    radius = disk_radius
    for _ in range(n):
        radius /= local.r
    cp = refined_closest_point(master, radius)
    w1 = local.r * complex(math.cos(local.theta), math.sin(local.theta))
    foot = cp.foot
    dist = cp.distance
    angle = cp.angle
    kappa = float(np.max(master.curvatures))
    for _ in range(n):
        foot = foot * w1
        dist = dist * local.r
        angle = angle + local.theta
        kappa = kappa / local.r
    return FoldMetrics(
        m=m,
        n=n,
        distance=dist,
        angle=angle_mod_2pi(angle),
        curvature=kappa,
        closest=foot,
        residual_max=float(np.max(master.residuals)),
    )
