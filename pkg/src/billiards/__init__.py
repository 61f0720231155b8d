"""Billiard dynamics and second-variation analysis in strictly convex bodies."""

from .dynamics import (
    ChordData,
    OrbitSegment,
    PhasePoint,
    billiard_step,
    orbit,
    orbit_to_csv,
    phase_point,
    reflect,
    reversed_start,
)
from .errors import (
    BilliardError,
    ConfigError,
    ConjugatePointNotFound,
    DegenerateChord,
    NearTangentRay,
    NotAnOrbit,
    TwistFailure,
)
from .experiments import (
    Check,
    CurvatureBounds,
    ExperimentReport,
    angle_threshold_estimate,
    ellipsoid_flat_point_check,
    sphere_report,
    symmetric_lift_check,
)
from .surface import (
    Ellipsoid,
    GenericImplicit,
    Sphere,
    Surface,
    TangentFrame,
    surface_from_json,
)
from .variation import (
    ChordOperators,
    ConjugateResult,
    DefinitenessReport,
    JacobiField,
    MaximizerSample,
    MaximizerSetSample,
    SecondVariationForm,
    assemble_form,
    chord_operators,
    definiteness,
    detect_conjugate,
    interior_form,
    jacobi_propagate,
    kernel_field,
    maximizer_set_sample,
    mixed_block,
    one_bounce_form,
    one_bounce_matrix,
    restrict_form,
    scan_interior_eigenvalues,
    segment_operators,
)

__all__ = [
    "BilliardError",
    "Check",
    "ChordData",
    "ChordOperators",
    "ConfigError",
    "ConjugatePointNotFound",
    "ConjugateResult",
    "CurvatureBounds",
    "DefinitenessReport",
    "DegenerateChord",
    "Ellipsoid",
    "ExperimentReport",
    "GenericImplicit",
    "JacobiField",
    "MaximizerSample",
    "MaximizerSetSample",
    "NearTangentRay",
    "NotAnOrbit",
    "OrbitSegment",
    "PhasePoint",
    "SecondVariationForm",
    "Sphere",
    "Surface",
    "TangentFrame",
    "TwistFailure",
    "angle_threshold_estimate",
    "assemble_form",
    "billiard_step",
    "chord_operators",
    "definiteness",
    "detect_conjugate",
    "ellipsoid_flat_point_check",
    "interior_form",
    "jacobi_propagate",
    "kernel_field",
    "maximizer_set_sample",
    "mixed_block",
    "one_bounce_form",
    "one_bounce_matrix",
    "orbit",
    "orbit_to_csv",
    "phase_point",
    "reflect",
    "restrict_form",
    "reversed_start",
    "scan_interior_eigenvalues",
    "segment_operators",
    "sphere_report",
    "surface_from_json",
    "symmetric_lift_check",
]

__version__ = "0.1.0"
