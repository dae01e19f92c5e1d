"""Planar curve measurements.

Everything the asymptotic laws consume lives here: slopes of space
vectors, discrete curvature, closest-point data with oriented tangent
angles, rotation numbers of angle orbits, Hausdorff distances and straight
line fits.

The closest-point refinement interpolates the curve quadratically in
index coordinates.  Every operation is a fixed linear combination of the
sample points followed by a norm, so scaling a curve by a complex factor
scales the refined distance by exactly the factor's modulus up to a few
ulp.  Several laws in the test-suite rely on that exactness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericsError

Array = np.ndarray

TWO_PI = 2.0 * math.pi


def wrap_angle(x: Array | float):
    """Wrap to (-pi, pi]."""
    wrapped = -((-np.asarray(x) + math.pi) % TWO_PI - math.pi)
    if np.ndim(x) == 0:
        return float(wrapped)
    return wrapped


def angle_mod_2pi(x: float) -> float:
    """Normalize to [0, 2pi)."""
    a = float(np.asarray(x) % TWO_PI)
    # the float modulo of a tiny negative number rounds up to 2pi itself
    return 0.0 if a >= TWO_PI else a


# --------------------------------------------------------------------------
# slopes


def absolute_slope(vectors: Array) -> Array | float:
    """|vertical| / |planar| of space vectors with shape (..., 3).

    Vertical vectors give inf, the zero vector nan.
    """
    vectors = np.asarray(vectors, dtype=float)
    planar = np.hypot(vectors[..., 0], vectors[..., 1])
    vert = np.abs(vectors[..., 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(planar > 0.0, vert / np.where(planar > 0.0, planar, 1.0), np.where(vert > 0.0, np.inf, np.nan))
    if vectors.ndim == 1:
        return float(slope)
    return slope


def max_absolute_slope(vectors: Array) -> float:
    """Maximum absolute slope over a batch of space vectors."""
    slopes = np.asarray(absolute_slope(vectors))
    return float(np.max(slopes))


# --------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class PlanarCurve:
    """Oriented polyline sampling of a planar curve.

    points: (N, 2) sample positions, consecutive points distinct.
    tangents: (N, 2) unit tangents in the orientation of traversal.
    """

    points: Array
    tangents: Array

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("curve needs at least two planar points")
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(steps == 0.0):
            raise ValueError("consecutive curve points must be distinct")

    @property
    def complex_points(self) -> Array:
        return self.points[..., 0] + 1j * self.points[..., 1]

    @property
    def complex_tangents(self) -> Array:
        return self.tangents[..., 0] + 1j * self.tangents[..., 1]

    def arc_parameters(self) -> Array:
        """Cumulative chord length from the first sample."""
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def reversed(self) -> "PlanarCurve":
        return PlanarCurve(self.points[::-1].copy(), -self.tangents[::-1].copy())

    def scaled(self, factor: complex) -> "PlanarCurve":
        """Exact complex multiplication of points and tangent directions."""
        z = self.complex_points * factor
        tz = self.complex_tangents * factor
        tz = tz / np.abs(tz)
        return PlanarCurve(np.stack([z.real, z.imag], axis=-1), np.stack([tz.real, tz.imag], axis=-1))

    def clipped_to_disk(self, radius: float) -> "PlanarCurve":
        """Contiguous sub-polyline of samples inside |z| <= radius around
        the global closest point to the origin."""
        norms = np.linalg.norm(self.points, axis=1)
        inside = norms <= radius
        if not np.any(inside):
            raise DomainError("curve does not meet the disk")
        center = int(np.argmin(norms))
        lo = center
        while lo > 0 and inside[lo - 1]:
            lo -= 1
        hi = center
        while hi < len(inside) - 1 and inside[hi + 1]:
            hi += 1
        if hi - lo < 1:
            raise DomainError("fewer than two curve samples inside the disk")
        return PlanarCurve(self.points[lo : hi + 1].copy(), self.tangents[lo : hi + 1].copy())

    def to_rows(self) -> list[tuple[float, float, float, float, float]]:
        s = self.arc_parameters()
        return [
            (float(s[i]), float(self.points[i, 0]), float(self.points[i, 1]), float(self.tangents[i, 0]), float(self.tangents[i, 1]))
            for i in range(len(s))
        ]


@dataclass(frozen=True)
class OrientedSegment:
    """Oriented straight segment, stored by the foot of the perpendicular
    from the origin, the tangent angle and the half length."""

    foot: complex
    angle: float
    half_length: float

    @property
    def direction(self) -> complex:
        return complex(math.cos(self.angle), math.sin(self.angle))

    @property
    def distance(self) -> float:
        return abs(self.foot)

    def point(self, s: float) -> complex:
        return self.foot + s * self.direction

    def sample(self, n: int = 256) -> PlanarCurve:
        s = np.linspace(-self.half_length, self.half_length, n)
        z = self.foot + s * self.direction
        t = np.full(n, self.direction)
        return PlanarCurve(np.stack([z.real, z.imag], axis=-1), np.stack([t.real, t.imag], axis=-1))


@dataclass(frozen=True)
class DiameterClass:
    """A diameter of the invariant disk of directions: an unoriented line
    through the origin, tracked with an oriented angle in [0, 2pi)."""

    angle: float

    def rotated(self, delta: float) -> "DiameterClass":
        return DiameterClass(angle_mod_2pi(self.angle + delta))


# --------------------------------------------------------------------------
# curvature


def max_curvature(curve: PlanarCurve | Array) -> float:
    """Maximum circumcircle curvature over consecutive sample triples.

    Collinear triples contribute zero curvature.
    """
    pts = curve.points if isinstance(curve, PlanarCurve) else np.asarray(curve, dtype=float)
    if len(pts) < 3:
        return 0.0
    a = pts[:-2]
    b = pts[1:-1]
    c = pts[2:]
    ab = b - a
    bc = c - b
    ca = a - c
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    lab = np.linalg.norm(ab, axis=1)
    lbc = np.linalg.norm(bc, axis=1)
    lca = np.linalg.norm(ca, axis=1)
    denom = lab * lbc * lca
    good = denom > 0.0
    if not np.any(good):
        return 0.0
    kappa = 2.0 * np.abs(cross[good]) / denom[good]
    return float(np.max(kappa))


# --------------------------------------------------------------------------
# closest point


@dataclass(frozen=True)
class ClosestPoint:
    """Closest point of a curve to the origin with the oriented tangent."""

    foot: complex
    angle: float
    distance: float
    endpoint: bool
    index: int


def closest_point_and_angle(
    curve: PlanarCurve,
    disk_radius: float,
    uniqueness_scale: float | None = None,
) -> ClosestPoint:
    """Refined closest point to the origin and its oriented tangent angle.

    Preconditions checked: the curve enters the disk of the given radius
    and its discrete curvature stays below 1/disk_radius, which makes the
    closest point unique for curves passing near the center.  Two distinct
    local minimizers at indistinguishable distance raise a uniqueness
    error.  A minimum attained at an endpoint is flagged rather than
    refined.
    """
    pts = curve.points
    dist2 = pts[:, 0] * pts[:, 0] + pts[:, 1] * pts[:, 1]
    i0 = int(np.argmin(dist2))
    dmin = math.sqrt(float(dist2[i0]))
    if dmin >= disk_radius:
        raise DomainError("curve misses the disk; closest-point law does not apply")
    kappa = max_curvature(curve)
    if kappa >= 1.0 / disk_radius:
        raise DomainError(f"curvature {kappa:.3e} exceeds 1/a; closest point may not be unique")

    scale = uniqueness_scale if uniqueness_scale is not None else 1e-6 * disk_radius
    interior = _local_minima(dist2)
    close = [i for i in interior if math.sqrt(float(dist2[i])) <= dmin + scale]
    if len(close) > 1:
        arcs = curve.arc_parameters()
        span = max(abs(arcs[i] - arcs[i0]) for i in close)
        if span > scale:
            raise NumericsError("uniqueness violated: two closest-point candidates on the curve")

    if i0 == 0 or i0 == len(pts) - 1:
        z = complex(pts[i0, 0], pts[i0, 1])
        t = complex(curve.tangents[i0, 0], curve.tangents[i0, 1])
        return ClosestPoint(z, math.atan2(t.imag, t.real), abs(z), True, i0)

    # quadratic refinement in index coordinates: all arithmetic is linear
    # in the sample points, so complex scaling of the curve scales the
    # refined foot exactly.
    zm = complex(pts[i0 - 1, 0], pts[i0 - 1, 1])
    z0 = complex(pts[i0, 0], pts[i0, 1])
    zp = complex(pts[i0 + 1, 0], pts[i0 + 1, 1])
    ym = float(dist2[i0 - 1])
    y0 = float(dist2[i0])
    yp = float(dist2[i0 + 1])
    denom = ym - 2.0 * y0 + yp
    delta = 0.0 if denom <= 0.0 else 0.5 * (ym - yp) / denom
    delta = float(np.clip(delta, -1.0, 1.0))
    # quadratic interpolation of the curve through the three samples
    ca = 0.5 * (zp + zm) - z0
    cb = 0.5 * (zp - zm)
    foot = z0 + delta * cb + delta * delta * ca
    velocity = cb + 2.0 * delta * ca
    speed = abs(velocity)
    if speed == 0.0:
        velocity = complex(curve.tangents[i0, 0], curve.tangents[i0, 1])
        speed = 1.0
    angle = math.atan2(velocity.imag, velocity.real)
    return ClosestPoint(foot, angle, abs(foot), False, i0)


def _local_minima(values: Array) -> list[int]:
    out = []
    for i in range(1, len(values) - 1):
        if values[i] <= values[i - 1] and values[i] <= values[i + 1]:
            out.append(i)
    return out


# --------------------------------------------------------------------------
# rotation numbers and signatures


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    half_width: float


def rotation_number(angles: Array) -> RotationEstimate:
    """Rotation number of an angle orbit on the circle.

    Increments are lifted to (-pi, pi]; the value is the mean increment
    over 2pi (mod 1), the half-width half the spread of increments.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size < 2:
        raise ValueError("rotation number needs at least two angles")
    inc = wrap_angle(np.diff(angles))
    value = float(np.mean(inc) / TWO_PI) % 1.0
    half_width = float((np.max(inc) - np.min(inc)) / 2.0 / TWO_PI)
    return RotationEstimate(value, half_width)


def rational_signature(angles: Array, tol: float = 1e-9, max_steps: int | None = None) -> tuple[int, int] | None:
    """Orbit-closure signature (u, v): the orbit closes after u steps with
    winding number v.  None when no closure within tolerance occurs."""
    angles = np.asarray(angles, dtype=float)
    inc = wrap_angle(np.diff(angles))
    lifted = np.concatenate([[angles[0]], angles[0] + np.cumsum(inc)])
    limit = len(angles) - 1 if max_steps is None else min(max_steps, len(angles) - 1)
    for u in range(1, limit + 1):
        total = lifted[u] - lifted[0]
        v = round(total / TWO_PI)
        if v != 0 and abs(total - TWO_PI * v) < tol * u:
            return (u, abs(int(v)))
    return None


# --------------------------------------------------------------------------
# distances


def point_to_polyline(points: Array, poly: Array, chunk: int = 2048) -> Array:
    """Distance from each point to a polyline, with exact projection onto
    the segments.  points: (M, 2), poly: (N, 2)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(poly, dtype=float)
    a = poly[:-1]
    ab = poly[1:] - a
    ab2 = np.sum(ab * ab, axis=1)
    ab2 = np.where(ab2 > 0.0, ab2, 1.0)
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        p = points[start : start + chunk]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("mnk,nk->mn", ap, ab) / ab2[None, :], 0.0, 1.0)
        closest = a[None, :, :] + t[..., None] * ab[None, :, :]
        d = np.linalg.norm(p[:, None, :] - closest, axis=2)
        out[start : start + chunk] = np.min(d, axis=1)
    return out


def hausdorff_distance(curve_a: PlanarCurve | Array, curve_b: PlanarCurve | Array) -> float:
    """Symmetric Hausdorff distance between two sampled curves, measuring
    each sample against the other polyline's segments."""
    pa = curve_a.points if isinstance(curve_a, PlanarCurve) else np.asarray(curve_a, dtype=float)
    pb = curve_b.points if isinstance(curve_b, PlanarCurve) else np.asarray(curve_b, dtype=float)
    d_ab = float(np.max(point_to_polyline(pa, pb)))
    d_ba = float(np.max(point_to_polyline(pb, pa)))
    return max(d_ab, d_ba)


# --------------------------------------------------------------------------
# straight line fits


@dataclass(frozen=True)
class LineFit:
    segment: OrientedSegment
    residual: float
    rms_residual: float


def fit_line_segment(curve: PlanarCurve) -> LineFit:
    """Total least squares line fit of a sampled curve, oriented along the
    majority tangent direction.

    The fitted object is returned as an oriented segment through the foot
    of the perpendicular from the origin, spanning the data extent; the
    residual is the maximum orthogonal deviation of the samples.
    """
    pts = curve.points
    centroid = np.mean(pts, axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    direction = eigvecs[:, int(np.argmax(eigvals))]
    mean_tangent = np.mean(curve.tangents, axis=0)
    if float(direction @ mean_tangent) < 0.0:
        direction = -direction
    dirc = complex(direction[0], direction[1])
    cc = complex(centroid[0], centroid[1])
    s_star = -(centroid @ direction)
    foot = cc + s_star * dirc
    along = centered @ direction
    normal = np.array([-direction[1], direction[0]])
    dev = centered @ normal
    residual = float(np.max(np.abs(dev)))
    rms = float(np.sqrt(np.mean(dev * dev)))
    half_length = float(0.5 * (np.max(along) - np.min(along)))
    angle = math.atan2(direction[1], direction[0])
    return LineFit(OrientedSegment(foot, angle, half_length), residual, rms)
