"""Cached computation pipelines over one system or a pair of systems.

A SystemPipeline owns every derived object of one system: resolved trip
integers, the recrossing, the transversal disk family, fold masters, the
dense metrics table, the scaled-distance constant, subsequence plans,
limit segments, and the moduli estimate.  Everything is computed at most
once and shared by reference.

A PairPipelines couples two systems for conjugacy work.  The second
pipeline adopts the first one's shallow plan indices (with the window
scaled by the tangency-point ratio), so family members line up one to
one and transport residuals compare like with like.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .atlas import (
    DiskFamily,
    ProbeCrossing,
    Recrossing,
    SurfacePiece,
    bent_disk_sequence,
    probe_intersection,
    recrossing_at,
    resolve_trips,
    sample_max_slope,
    transversal_disks,
)
from .errors import ConfigError, PlanError
from .folds import FoldCurve, FoldMetrics, fold_locus, measure_fold
from .model import SystemSpec, validate_params
from .moduli import (
    DtConstant,
    LimitSegment,
    ModuliEstimate,
    SegmentFamily,
    SubsequencePlan,
    estimate_dt_constant,
    estimate_moduli,
    limit_segment,
    select_subsequence,
    xi_family,
)

Array = np.ndarray


@dataclass(frozen=True)
class PipelineKnobs:
    """Tuning knobs shared by every pipeline stage.

    The defaults resolve the reference system comfortably; they are
    read with getattr fallbacks everywhere, so partial stand-ins work.
    """

    u_max: int = 40
    m0_max: int = 60
    slope_grid: int = 96
    metrics_m_max: int = 15
    metrics_n_max: int = 3
    dt_m_min: int = 4
    moduli_m_lo: int = 6
    moduli_m_hi: int = 11
    rotation_n_max: int = 40
    signature_tol: float = 1e-9
    w: float = 0.3
    n_max: int = 72
    deep_n_min: int = 130
    deep_n_max: int = 900
    min_members: int = 5
    max_members: int = 12
    k_max: int = 5
    max_fold_m: int = 16
    threads: int = 1


class SystemPipeline:
    """Lazy, memoized derived data of one model system."""

    def __init__(self, system: SystemSpec, knobs: PipelineKnobs | None = None):
        self.raw_system = system
        self.knobs = knobs if knobs is not None else PipelineKnobs()
        self._cache: dict = {}
        self._plan_override: SubsequencePlan | None = None

    def _memo(self, key, factory):
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    # -- system level ------------------------------------------------------

    def ensure_valid(self) -> None:
        report = self._memo("validation", lambda: validate_params(self.raw_system))
        if not report.passed:
            names = ", ".join(c.name for c in report.failures)
            raise ConfigError(f"invalid system parameters: {names}")

    @property
    def system(self) -> SystemSpec:
        def build():
            self.ensure_valid()
            return resolve_trips(
                self.raw_system, u_max=self.knobs.u_max, m0_max=self.knobs.m0_max
            )

        return self._memo("system", build)

    @property
    def label(self) -> str:
        return self.raw_system.label

    def recrossing(self) -> Recrossing:
        return self._memo(
            "recrossing", lambda: recrossing_at(self.system, self.system.trips.u)
        )

    def disks(self) -> DiskFamily:
        def build():
            m_max = max(self.knobs.metrics_m_max, self.knobs.moduli_m_hi)
            return transversal_disks(
                self.system, self.recrossing(), m_max, slope_grid=self.knobs.slope_grid
            )

        return self._memo("disks", build)

    def piece(self, m: int) -> SurfacePiece:
        return self._memo(("piece", m), lambda: bent_disk_sequence(self.system, self.disks(), m))

    def slope(self, m: int) -> float:
        return self._memo(
            ("slope", m),
            lambda: sample_max_slope(self.disks().disk(m), self.knobs.slope_grid),
        )

    def slope_table(self) -> list[tuple[int, float]]:
        m_max = self.knobs.metrics_m_max
        return [(m, self.slope(m)) for m in range(m_max + 1)]

    def probe(self, m: int) -> ProbeCrossing:
        return self._memo(("probe", m), lambda: probe_intersection(self.system, self.disks(), m))

    def probe_table(self) -> list[ProbeCrossing]:
        m_max = self.knobs.metrics_m_max
        return [self.probe(m) for m in range(m_max + 1)]

    # -- folds -------------------------------------------------------------

    def table_master(self, m: int) -> FoldCurve:
        if m < 0 or m > self.knobs.max_fold_m:
            raise PlanError(f"fold depth m = {m} outside the resolvable range")

        def build():
            local = self.system.local
            clip = local.a * local.r ** (-self.knobs.metrics_n_max)
            return fold_locus(self.piece(m), clip_bound=clip)

        return self._memo(("master", m), build)

    def plan_master(self, m: int) -> tuple[FoldCurve, int]:
        return self.table_master(m), self.knobs.metrics_n_max

    def table_metric(self, m: int, n: int) -> FoldMetrics:
        def build():
            local = self.system.local
            return measure_fold(self.table_master(m), m, n, local, local.a)

        return self._memo(("metric", m, n), build)

    def metrics_table(self) -> list[FoldMetrics]:
        rows = []
        for m in range(self.knobs.metrics_m_max + 1):
            for n in range(self.knobs.metrics_n_max + 1):
                rows.append(self.table_metric(m, n))
        return rows

    # -- plans and segments --------------------------------------------------

    def dt_constant(self) -> DtConstant:
        return self._memo("dt", lambda: estimate_dt_constant(self))

    def adopt_plan(self, plan: SubsequencePlan) -> None:
        """Install a shallow plan transplanted from a partner system."""
        if "shallow" in self._cache:
            raise PlanError("shallow plan already computed; adopt before first use")
        self._plan_override = plan

    def shallow_plan(self) -> SubsequencePlan:
        def build():
            if self._plan_override is not None:
                return self._plan_override
            return select_subsequence(self)

        return self._memo("shallow", build)

    def deep_plan(self) -> SubsequencePlan:
        def build():
            return select_subsequence(
                self,
                w=self.dt_constant().value,
                n_min=self.knobs.deep_n_min,
                n_max=self.knobs.deep_n_max,
            )

        return self._memo("deep", build)

    def limit_segments(self) -> tuple[LimitSegment, SegmentFamily]:
        return self._memo("segments", lambda: limit_segment(self, self.shallow_plan()))

    def xi_segments(self) -> SegmentFamily:
        return self._memo("xi", lambda: xi_family(self))

    def moduli(self) -> ModuliEstimate:
        return self._memo("moduli", lambda: estimate_moduli(self))


def transplant_plan(plan: SubsequencePlan, system: SystemSpec, k_hat: float, w: float) -> SubsequencePlan:
    """The same plan indices re-priced for a partner system.

    Pairs and their order are kept verbatim; predicted values, the
    window, and the anchor value are recomputed from the partner's
    constant and multipliers.
    """
    local = system.local
    log_k = math.log(k_hat)
    log_lam = math.log(local.lam)
    log_r = math.log(local.r)
    values = tuple(
        math.exp(log_k + m * log_lam + n * log_r) for m, n in plan.pairs
    )
    w0 = values[-1]
    residuals = tuple(abs(v - w0) for v in values)
    return replace(
        plan,
        w=w,
        w0=w0,
        values=values,
        residuals=residuals,
        k_hat=k_hat,
        notes=plan.notes + ("plan transplanted from the partner system",),
    )


class PairPipelines:
    """Two pipelines with aligned plan indices for conjugacy work."""

    def __init__(
        self,
        f_system: SystemSpec,
        g_system: SystemSpec,
        knobs: PipelineKnobs | None = None,
        knobs_g: PipelineKnobs | None = None,
    ):
        knobs = knobs if knobs is not None else PipelineKnobs()
        if knobs_g is None:
            q_f = abs(f_system.transition.q_z)
            q_g = abs(g_system.transition.q_z)
            scale = q_g / q_f if q_f > 0 else 1.0
            knobs_g = replace(knobs, w=knobs.w * scale)
        self.f = SystemPipeline(f_system, knobs)
        self.g = SystemPipeline(g_system, knobs_g)
        self._aligned = False

    def align_plans(self) -> None:
        """Make the second pipeline adopt the first one's plan indices."""
        if self._aligned:
            return
        plan_f = self.f.shallow_plan()
        self.g.adopt_plan(
            transplant_plan(
                plan_f, self.g.system, self.g.dt_constant().value, self.g.knobs.w
            )
        )
        self._aligned = True
