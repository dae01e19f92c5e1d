"""Subsequence plans, limit segments, and moduli estimation.

The distance of the m-fold curve to the chart center decays like a
constant times lambda^m.  Fitting that constant, choosing (m_j, n_j)
subsequences whose rescaled distances accumulate inside a target window,
fitting the straight limit segments, and reading off the invariants
(lambda, r, theta, the integer ratio, the rotation number, and the
planar cross ratio) all live here.

Functions taking ``s`` expect a pipeline-like provider with:

    s.system            SystemSpec
    s.knobs             tuning knobs (attributes read with defaults)
    s.table_metric(m,n) FoldMetrics from the dense metrics table
    s.metrics_table()   all table FoldMetrics
    s.table_master(m)   FoldCurve master behind the table rows
    s.plan_master(m)    (FoldCurve, traced_depth) for plan windows
    s.dt_constant()     DtConstant
    s.shallow_plan()    SubsequencePlan at the segment window
    s.deep_plan()       SubsequencePlan at the self-normalized window
    s.recrossing()      Recrossing of the unstable surface

The cores (richardson_limit, subsequence_plan) are plain arithmetic and
usable without a provider.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import PlanError, SflabError
from .geometry import (
    OrientedSegment,
    PlanarCurve,
    angle_mod_2pi,
    closest_point_and_angle,
    fit_line_segment,
    hausdorff_distance,
    max_curvature,
    rational_signature,
    rotation_number,
    wrap_angle,
)
from .folds import FoldCurve, measure_fold, refined_closest_point, rotated_fold

Array = np.ndarray

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# scaled-distance constant


@dataclass(frozen=True)
class DtConstant:
    """Limit of d_{m,0} / lambda^m with an extrapolation error bar."""

    value: float
    error: float
    estimates: tuple[float, ...]
    ms: tuple[int, ...]


def richardson_limit(
    ms: list[int] | tuple[int, ...],
    values: list[float] | tuple[float, ...] | Array,
    lam: float,
) -> tuple[float, float, tuple[float, ...]]:
    """Limit of values[i] / lam^ms[i] by one Aitken acceleration sweep.

    Exactly geometric inputs short-circuit the acceleration (the second
    difference vanishes, so the raw sequence is already the answer).
    Returns (value, half-width of the last two estimates, estimates).
    """
    ms = [int(m) for m in ms]
    vals = [float(v) for v in values]
    if len(ms) != len(vals):
        raise ValueError("ms and values must have equal length")
    xs = [v / lam**m for m, v in zip(ms, vals)]
    if len(xs) < 3:
        raise PlanError("constant not resolved: need at least three fold depths")
    scale = max(abs(x) for x in xs)
    if scale == 0.0:
        raise PlanError("constant not resolved: all distances vanished")
    diffs = [xs[i + 1] - xs[i] for i in range(len(xs) - 1)]
    if max(abs(d) for d in diffs) <= 1e-13 * scale:
        value = xs[-1]
        error = 0.5 * abs(xs[-1] - xs[-2])
        return value, error, tuple(xs)
    # drop the tail where quantization noise overtakes the shrinking
    # convergence terms: keep the prefix ending at the smallest step
    mags = [abs(d) for d in diffs]
    i_min = mags.index(min(mags))
    if i_min == 0 and abs(diffs[-1]) > abs(diffs[0]) and abs(diffs[-1]) > 1e-9 * scale:
        raise PlanError(
            "constant not resolved: scaled fold distances are not Cauchy"
        )
    if i_min + 2 >= 3:
        xs = xs[: i_min + 2]
        diffs = diffs[: i_min + 1]
    accelerated: list[float] = []
    for i in range(len(xs) - 2):
        d2 = xs[i + 2] - 2.0 * xs[i + 1] + xs[i]
        if abs(d2) <= 1e-13 * scale:
            accelerated.append(xs[i + 2])
        else:
            step = xs[i + 2] - xs[i + 1]
            accelerated.append(xs[i + 2] - step * step / d2)
    value = accelerated[-1]
    if len(accelerated) >= 2:
        error = 0.5 * abs(accelerated[-1] - accelerated[-2])
    else:
        error = 0.5 * abs(diffs[-1])
    return value, error, tuple(accelerated)


def estimate_dt_constant(s, m_range: range | None = None) -> DtConstant:
    """Fit the constant in d_{m,0} ~ K lambda^m from the metrics table."""
    knobs = s.knobs
    if m_range is None:
        lo = getattr(knobs, "dt_m_min", 4)
        hi = getattr(knobs, "metrics_m_max", 15)
        m_range = range(lo, hi + 1)
    ms = list(m_range)
    values = [s.table_metric(m, 0).distance for m in ms]
    lam = s.system.local.lam
    value, error, estimates = richardson_limit(ms, values, lam)
    if value <= 0.0:
        raise PlanError("constant not resolved: non-positive limit")
    return DtConstant(value=value, error=error, estimates=estimates, ms=tuple(ms))


# --------------------------------------------------------------------------
# subsequence plans


@dataclass(frozen=True)
class SubsequencePlan:
    """Pairs (m_j, n_j) whose predicted distances accumulate at w0.

    Members are ordered by decreasing |v_j - w0| so the last pair is the
    anchor, the member realizing the accumulation value.
    """

    pairs: tuple[tuple[int, int], ...]
    w: float
    w0: float
    values: tuple[float, ...]
    residuals: tuple[float, ...]
    k_hat: float
    notes: tuple[str, ...] = ()

    @property
    def anchor(self) -> tuple[int, int]:
        return self.pairs[-1]

    def ratios(self) -> tuple[float, ...]:
        return tuple(m / n for m, n in self.pairs)

    def to_json_dict(self) -> dict:
        return {
            "pairs": [[m, n] for m, n in self.pairs],
            "w": self.w,
            "w0": self.w0,
            "values": list(self.values),
            "residuals": list(self.residuals),
            "k_hat": self.k_hat,
            "notes": list(self.notes),
        }


def _minimal_depth(log_k: float, log_lam: float, log_r: float, log_w: float, n: int) -> int:
    """Smallest positive m with log_k + m log_lam + n log_r <= log_w."""
    guess = (log_w - log_k - n * log_r) / log_lam
    m = max(1, math.ceil(guess) - 2)
    while log_k + m * log_lam + n * log_r > log_w:
        m += 1
    while m > 1 and log_k + (m - 1) * log_lam + n * log_r <= log_w:
        m -= 1
    return m


def subsequence_plan(
    k_hat: float,
    lam: float,
    r: float,
    w: float,
    n_min: int = 1,
    n_max: int = 72,
    min_members: int = 5,
    max_members: int = 12,
) -> SubsequencePlan:
    """Select the convergent (m_j, n_j) subsequence for the window w.

    For each n the minimal positive depth m(n) with k_hat lambda^m r^n <= w
    is computed; candidates with m(n) >= 2 carry values in (w lambda, w].
    The member set is the sliding window over sorted log-values with the
    smallest average gap (by the three-distance theorem this is the
    continued-fraction-guided choice); ties prefer more members, then
    deeper n.  w0 is the value of the member closest to the cluster
    median, with near-ties resolved toward deeper m.
    """
    if not (0.0 < lam < 1.0) or r <= 1.0:
        raise PlanError("subsequence plan needs 0 < lambda < 1 < r")
    if not (0.0 < w):
        raise PlanError("subsequence plan needs a positive window")
    if k_hat <= 0.0:
        raise PlanError("subsequence plan needs a positive scaled-distance constant")
    log_k, log_lam, log_r, log_w = (
        math.log(k_hat),
        math.log(lam),
        math.log(r),
        math.log(w),
    )

    candidates: list[tuple[int, int, float]] = []
    for n in range(max(1, n_min), n_max + 1):
        m = _minimal_depth(log_k, log_lam, log_r, log_w, n)
        if m < 2:
            continue
        candidates.append((n, m, log_k + m * log_lam + n * log_r))
    if len(candidates) < min_members:
        raise PlanError(
            f"no convergent cluster with >= {min_members} members below "
            f"n_max = {n_max}; increase n_max"
        )

    order = sorted(range(len(candidates)), key=lambda i: candidates[i][2])
    logs = [candidates[order[i]][2] for i in range(len(order))]

    best_key = None
    best_window: tuple[int, int] | None = None
    top = min(max_members, len(order))
    for size in range(min_members, top + 1):
        for start in range(0, len(order) - size + 1):
            width = logs[start + size - 1] - logs[start]
            avg_gap = width / (size - 1)
            max_n = max(candidates[order[i]][0] for i in range(start, start + size))
            key = (avg_gap, -size, -max_n, start)
            if best_key is None or key < best_key:
                best_key = key
                best_window = (start, size)
    assert best_window is not None
    start, size = best_window
    members = [candidates[order[i]] for i in range(start, start + size)]

    vs = [math.exp(lv) for (_, _, lv) in members]
    med = float(np.median(vs))
    gaps = [abs(v - med) for v in vs]
    gap_min = min(gaps)
    near = [
        i
        for i in range(len(members))
        if gaps[i] <= 1.25 * gap_min + 1e-300
    ]
    anchor_idx = max(near, key=lambda i: (members[i][1], members[i][0]))
    w0 = vs[anchor_idx]

    ranked = sorted(
        range(len(members)),
        key=lambda i: (-abs(vs[i] - w0), members[i][0]),
    )
    pairs = tuple((members[i][1], members[i][0]) for i in ranked)
    values = tuple(vs[i] for i in ranked)
    residuals = tuple(abs(v - w0) for v in values)

    notes: list[str] = []
    if not (w * lam / 2.0 <= w0 <= w * (1.0 + 1e-12)):
        notes.append("window bracket violated; plan kept for inspection")
    return SubsequencePlan(
        pairs=pairs,
        w=w,
        w0=w0,
        values=values,
        residuals=residuals,
        k_hat=k_hat,
        notes=tuple(notes),
    )


def select_subsequence(
    s,
    w: float | None = None,
    n_min: int | None = None,
    n_max: int | None = None,
) -> SubsequencePlan:
    """Subsequence plan for a pipeline; w defaults to the segment window.

    Passing w equal to the fitted constant k_hat makes the depth rule a
    pure integer ceiling, which is the deterministic way to exhibit the
    m_j/n_j limit at large n without computing any folds there.
    """
    knobs = s.knobs
    local = s.system.local
    k_hat = s.dt_constant().value
    if w is None:
        w = getattr(knobs, "w", 0.3)
    if w >= local.a / 2.0:
        raise PlanError("window must be below half the chart radius")
    return subsequence_plan(
        k_hat,
        local.lam,
        local.r,
        w,
        n_min=1 if n_min is None else n_min,
        n_max=getattr(knobs, "n_max", 72) if n_max is None else n_max,
        min_members=getattr(knobs, "min_members", 5),
        max_members=getattr(knobs, "max_members", 12),
    )


# --------------------------------------------------------------------------
# limit segments


@dataclass(frozen=True)
class LimitSegment:
    """Straight-segment limit of a rescaled folding curve."""

    segment: OrientedSegment
    distance: float
    fit_residual: float
    j_index: int
    m: int
    n: int
    method: str
    validation_hausdorff: float | None = None

    @property
    def angle(self) -> float:
        return self.segment.angle


@dataclass(frozen=True)
class SegmentFamily:
    """Indexed family of limit segments with its construction notes."""

    kind: str
    segments: tuple[LimitSegment, ...]
    a0: int | None = None
    notes: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.segments)

    def angles(self) -> tuple[float, ...]:
        return tuple(seg.angle for seg in self.segments)

    def distances(self) -> tuple[float, ...]:
        return tuple(seg.distance for seg in self.segments)


def _w1(local) -> complex:
    return local.r * complex(math.cos(local.theta), math.sin(local.theta))


def fold_segment(s, m: int, n: int, j_index: int) -> LimitSegment:
    """Straight-line reduction of the (m, n) folding curve inside the chart.

    When the master window reaches depth n the rescaled samples span the
    chart chord and a least-squares fit is used.  Deeper images have no
    independently resolvable samples: the segment follows from the exact
    rotation-scaling of the master apex, with the curvature bound
    kappa r^{-n} (half chord)^2 / 2 as the honest fit residual.
    """
    local = s.system.local
    a = local.a
    master, traced_depth = s.plan_master(m)

    if n <= traced_depth:
        image = rotated_fold(master, n, local)
        assert isinstance(image, FoldCurve)
        planar = image.planar
        inside = np.hypot(planar.points[:, 0], planar.points[:, 1]) <= a * (1.0 + 1e-12)
        if int(np.count_nonzero(inside)) >= 16:
            clipped = PlanarCurve(planar.points[inside], planar.tangents[inside])
            fit = fit_line_segment(clipped)
            return LimitSegment(
                segment=fit.segment,
                distance=fit.segment.distance,
                fit_residual=fit.residual,
                j_index=j_index,
                m=m,
                n=n,
                method="direct-fit",
            )

    cp = refined_closest_point(master, a)
    foot = cp.foot
    w1 = _w1(local)
    for _ in range(n):
        foot = foot * w1
    d = abs(foot)
    if d >= a:
        raise PlanError(f"segment at (m = {m}, n = {n}) lies outside the chart")
    half = math.sqrt(a * a - d * d)
    kappa = float(np.max(master.curvatures)) * local.r ** (-n)
    residual = 0.5 * kappa * half * half
    segment = OrientedSegment(foot, angle_mod_2pi(cp.angle + n * local.theta), half)
    return LimitSegment(
        segment=segment,
        distance=d,
        fit_residual=residual,
        j_index=j_index,
        m=m,
        n=n,
        method="curvature-bound",
    )


def limit_segment(s, plan: SubsequencePlan, k_max: int | None = None) -> tuple[LimitSegment, SegmentFamily]:
    """Fit the limit segment at the plan anchor and its parallel family.

    The family member k comes from the fold at (m_anchor + k, n_anchor).
    All angles agree in the limit and distances contract by lambda per
    step; both are measured, not assumed, and reported on the family.
    """
    knobs = s.knobs
    if k_max is None:
        k_max = getattr(knobs, "k_max", 5)
    max_fold_m = getattr(knobs, "max_fold_m", 16)
    m_anchor, n_anchor = plan.anchor
    j_anchor = len(plan.pairs) - 1

    segments: list[LimitSegment] = []
    notes: list[str] = []
    for k in range(k_max + 1):
        m_k = m_anchor + k
        if m_k > max_fold_m:
            notes.append(
                f"family truncated at k = {k - 1}: depth {m_k} beyond the"
                " resolvable fold range"
            )
            break
        segments.append(fold_segment(s, m_k, n_anchor, j_anchor))
    if not segments:
        raise PlanError("no family member is resolvable at this plan anchor")

    gamma0 = segments[0]
    if gamma0.fit_residual > 1e-3 * plan.w0:
        raise PlanError("not yet straight; increase j")

    if len(plan.pairs) >= 2:
        m_prev, n_prev = plan.pairs[-2]
        if m_prev <= max_fold_m:
            prev = fold_segment(s, m_prev, n_prev, j_anchor - 1)
            validation = hausdorff_distance(
                gamma0.segment.sample(257).points,
                prev.segment.sample(257).points,
            )
            gamma0 = replace(gamma0, validation_hausdorff=validation)
            segments[0] = gamma0

    angles = [seg.angle for seg in segments]
    spread = max(
        abs(wrap_angle(x - y)) for x in angles for y in angles
    )
    notes.append(f"family angle spread = {spread:.3e}")
    lam = s.system.local.lam
    for k in range(len(segments) - 1):
        ratio = segments[k + 1].distance / segments[k].distance
        notes.append(f"distance ratio at k = {k}: {ratio / lam:.9f} of lambda")

    family = SegmentFamily(kind="gamma", segments=tuple(segments), notes=tuple(notes))
    return gamma0, family


def smallest_shift_integer(lam: float, r: float) -> int:
    """Smallest integer strictly above log(2r) / log(1/lambda)."""
    bound = math.log(2.0 * r) / math.log(1.0 / lam)
    a0 = math.floor(bound) + 1
    if a0 <= bound:
        a0 += 1
    return int(a0)


def xi_family(s, k_max: int | None = None) -> SegmentFamily:
    """Rotated sub-family xi_k built from the fitted limit segment.

    xi_k applies k local steps to the parallel-family member at shift
    a0 k, realized exactly on the fitted segment: the foot picks up one
    factor lambda^{a0} w1 per k, so distances contract by lambda^{a0} r
    per step and angles advance by exactly theta.
    """
    knobs = s.knobs
    if k_max is None:
        k_max = getattr(knobs, "k_max", 5)
    local = s.system.local
    a = local.a
    gamma0, _family = s.limit_segments()
    a0 = smallest_shift_integer(local.lam, local.r)
    mult = (local.lam**a0) * _w1(local)

    w0 = gamma0.distance
    foot = gamma0.segment.foot
    segments: list[LimitSegment] = []
    notes: list[str] = [f"built from the fitted limit segment; a0 = {a0}"]
    for k in range(k_max + 1):
        if k > 0:
            foot = foot * mult
        d = abs(foot)
        if d < 1e-12:
            notes.append(
                f"family truncated at k = {k - 1}: distances below 1e-12 refused"
            )
            break
        angle = angle_mod_2pi(gamma0.segment.angle + k * local.theta)
        half = math.sqrt(a * a - d * d)
        segments.append(
            LimitSegment(
                segment=OrientedSegment(foot, angle, half),
                distance=d,
                fit_residual=gamma0.fit_residual * local.r ** (-k),
                j_index=gamma0.j_index,
                m=gamma0.m + a0 * k,
                n=gamma0.n + k,
                method="exact-transform",
            )
        )
        if not d * 2.0**k < w0 * (1.0 + 1e-12):
            notes.append(f"decay bound violated at k = {k}")
    return SegmentFamily(kind="xi", segments=tuple(segments), a0=a0, notes=tuple(notes))


# --------------------------------------------------------------------------
# moduli


@dataclass(frozen=True)
class SubEstimate:
    value: float | None
    error: float | None

    @property
    def ok(self) -> bool:
        return self.value is not None

    def to_json(self):
        if self.value is None:
            return None
        return {"value": self.value, "error": self.error}


@dataclass(frozen=True)
class ModuliEstimate:
    """Numerical invariants of one system with error bars."""

    lambda_hat: SubEstimate
    r_hat: SubEstimate
    theta_hat: SubEstimate
    ratio_hat: SubEstimate
    rotation: SubEstimate
    signature: tuple[int, int] | str | None
    cross_ratio: complex | None
    errors: tuple[tuple[str, str], ...] = ()

    def to_json_dict(self) -> dict:
        if self.signature is None:
            signature = None
        elif isinstance(self.signature, str):
            signature = self.signature
        else:
            signature = [int(self.signature[0]), int(self.signature[1])]
        return {
            "lambda_hat": self.lambda_hat.to_json(),
            "r_hat": self.r_hat.to_json(),
            "theta_hat": self.theta_hat.to_json(),
            "ratio_hat": self.ratio_hat.to_json(),
            "rotation": self.rotation.to_json(),
            "signature": signature,
            "cross_ratio_re": None if self.cross_ratio is None else self.cross_ratio.real,
            "cross_ratio_im": None if self.cross_ratio is None else self.cross_ratio.imag,
            "errors": {k: v for k, v in self.errors},
        }


def _half_spread(values: list[float]) -> float:
    tail = values[-3:]
    return 0.5 * (max(tail) - min(tail))


def cross_ratio_invariant(s) -> complex:
    """Planar cross ratio z(s_pt) / z(q) of the first recrossing.

    s_pt is the base-plane preimage of the recrossing of the stable
    curve: its chart coordinate comes from the crossing parameters, and
    q is the primary tangency point itself.
    """
    system = s.system
    rec = s.recrossing()
    params = rec.crossing.params
    basis = complex(math.cos(system.beta), math.sin(system.beta))
    z_s = system.transition.q_z + basis * complex(float(params[0]), float(params[1]))
    if abs(z_s) > system.local.a:
        raise PlanError("pullback exits chart before reaching D_a(p)")
    return z_s / system.transition.q_z


def estimate_moduli(s) -> ModuliEstimate:
    """Estimate every modulus from the computed tables and plans.

    Sub-estimates fail independently: a failed entry is None and its
    error message is recorded under its key.
    """
    knobs = s.knobs
    local = s.system.local
    errors: list[tuple[str, str]] = []

    m_lo = getattr(knobs, "moduli_m_lo", 6)
    m_hi = getattr(knobs, "moduli_m_hi", 11)
    n_hi = getattr(knobs, "metrics_n_max", 3)

    lambda_hat = SubEstimate(None, None)
    try:
        ratios = [
            s.table_metric(m + 1, 0).distance / s.table_metric(m, 0).distance
            for m in range(m_lo, m_hi)
        ]
        value = math.exp(float(np.mean(np.log(ratios))))
        lambda_hat = SubEstimate(value, _half_spread(ratios))
    except SflabError as exc:
        errors.append(("lambda_hat", str(exc)))

    r_hat = SubEstimate(None, None)
    try:
        ratios = [
            s.table_metric(m, n + 1).distance / s.table_metric(m, n).distance
            for m in range(m_lo, m_hi + 1)
            for n in range(0, n_hi)
        ]
        value = math.exp(float(np.mean(np.log(ratios))))
        r_hat = SubEstimate(value, _half_spread(ratios))
    except SflabError as exc:
        errors.append(("r_hat", str(exc)))

    theta_hat = SubEstimate(None, None)
    try:
        increments = [
            wrap_angle(s.table_metric(m, n + 1).angle - s.table_metric(m, n).angle)
            for m in range(m_lo, m_hi + 1)
            for n in range(0, n_hi)
        ]
        mean_vec = np.mean(np.exp(1j * np.asarray(increments)))
        value = float(np.angle(mean_vec))
        deviations = [float(wrap_angle(inc - value)) for inc in increments]
        theta_hat = SubEstimate(value, _half_spread(deviations))
    except SflabError as exc:
        errors.append(("theta_hat", str(exc)))

    ratio_hat = SubEstimate(None, None)
    try:
        deep = s.deep_plan()
        ratios = [m / n for m, n in deep.pairs]
        ratio_hat = SubEstimate(ratios[-1], _half_spread(ratios))
    except SflabError as exc:
        errors.append(("ratio_hat", str(exc)))

    rotation = SubEstimate(None, None)
    signature: tuple[int, int] | str | None = None
    try:
        m_rot = m_hi
        master = s.table_master(m_rot)
        n_orbit = getattr(knobs, "rotation_n_max", 40)
        angles = [
            measure_fold(master, m_rot, n, local, local.a).angle
            for n in range(n_orbit + 1)
        ]
        rot = rotation_number(angles)
        rotation = SubEstimate(rot.value, rot.half_width)
        sig = rational_signature(
            np.asarray(angles), tol=getattr(knobs, "signature_tol", 1e-9)
        )
        signature = sig if sig is not None else "irrational"
    except SflabError as exc:
        errors.append(("rotation", str(exc)))

    cross_ratio: complex | None = None
    try:
        cross_ratio = cross_ratio_invariant(s)
    except SflabError as exc:
        errors.append(("cross_ratio", str(exc)))

    return ModuliEstimate(
        lambda_hat=lambda_hat,
        r_hat=r_hat,
        theta_hat=theta_hat,
        ratio_hat=ratio_hat,
        rotation=rotation,
        signature=signature,
        cross_ratio=cross_ratio,
        errors=tuple(errors),
    )
