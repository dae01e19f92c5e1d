"""Numerical laboratory for a three-dimensional saddle-focus model map
with a quadratic homoclinic tangency.

The package computes the bent images of the local unstable plane, traces
their folding curves, verifies the distance, angle, and curvature laws
those curves obey, fits the straight limit segments, estimates the
numerical invariants of the system, and recovers and verifies linear
conformal conjugacies between model pairs.
"""
from __future__ import annotations

from .errors import (
    AtlasError,
    ConfigError,
    DomainError,
    FoldError,
    NumericsError,
    PlanError,
    SflabError,
    WordDomainError,
)
from .model import (
    CONFIG_KEYS,
    ConjugacyMap,
    GlobalMapParams,
    SaddleFocusParams,
    SystemSpec,
    TripIntegers,
    evaluate_word,
    make_conjugate_system,
    stable_curve_point,
    system_from_dict,
    system_to_dict,
    validate_params,
)
from .atlas import (
    DiskFamily,
    Recrossing,
    SurfacePiece,
    bent_disk_sequence,
    find_recrossing,
    initial_sheet,
    probe_intersection,
    resolve_trips,
    sample_max_slope,
    transversal_disks,
)
from .folds import (
    FOLD_METRICS_HEADER,
    FoldCurve,
    FoldMetrics,
    TangencyReport,
    fold_locus,
    measure_fold,
    rotated_fold,
    verify_quadratic_tangency,
)
from .geometry import (
    DiameterClass,
    OrientedSegment,
    PlanarCurve,
    closest_point_and_angle,
    fit_line_segment,
    hausdorff_distance,
    rational_signature,
    rotation_number,
)
from .moduli import (
    DtConstant,
    LimitSegment,
    ModuliEstimate,
    SegmentFamily,
    SubsequencePlan,
    cross_ratio_invariant,
    estimate_dt_constant,
    estimate_moduli,
    fold_segment,
    limit_segment,
    richardson_limit,
    select_subsequence,
    smallest_shift_integer,
    subsequence_plan,
    xi_family,
)
from .conjugacy import (
    CheckReport,
    LinearConformalMap,
    PairReport,
    compare_moduli,
    epsilon_neighborhood_check,
    recover_conjugacy,
    verify_angle_differences,
    verify_equivariance,
    verify_segment_transport,
)
from .pipeline import PairPipelines, PipelineKnobs, SystemPipeline
from .config import RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "AtlasError",
    "CONFIG_KEYS",
    "CheckReport",
    "ConfigError",
    "ConjugacyMap",
    "DiameterClass",
    "DiskFamily",
    "DomainError",
    "DtConstant",
    "FOLD_METRICS_HEADER",
    "FoldCurve",
    "FoldError",
    "FoldMetrics",
    "GlobalMapParams",
    "LimitSegment",
    "LinearConformalMap",
    "ModuliEstimate",
    "NumericsError",
    "OrientedSegment",
    "PairPipelines",
    "PairReport",
    "PipelineKnobs",
    "PlanError",
    "PlanarCurve",
    "Recrossing",
    "RunConfig",
    "SaddleFocusParams",
    "SegmentFamily",
    "SflabError",
    "SubsequencePlan",
    "SurfacePiece",
    "SystemPipeline",
    "SystemSpec",
    "TangencyReport",
    "TripIntegers",
    "WordDomainError",
    "bent_disk_sequence",
    "closest_point_and_angle",
    "compare_moduli",
    "cross_ratio_invariant",
    "epsilon_neighborhood_check",
    "estimate_dt_constant",
    "estimate_moduli",
    "evaluate_word",
    "find_recrossing",
    "fit_line_segment",
    "fold_locus",
    "fold_segment",
    "hausdorff_distance",
    "initial_sheet",
    "limit_segment",
    "load_config",
    "make_conjugate_system",
    "measure_fold",
    "probe_intersection",
    "rational_signature",
    "recover_conjugacy",
    "resolve_trips",
    "richardson_limit",
    "rotated_fold",
    "rotation_number",
    "sample_max_slope",
    "select_subsequence",
    "smallest_shift_integer",
    "stable_curve_point",
    "subsequence_plan",
    "system_from_dict",
    "system_to_dict",
    "transversal_disks",
    "validate_params",
    "verify_angle_differences",
    "verify_equivariance",
    "verify_quadratic_tangency",
    "verify_segment_transport",
    "xi_family",
    "__version__",
]
