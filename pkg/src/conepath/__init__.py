"""Conic optimization toolkit with central-path warmstarting.

Per-cone barrier calculus and smoothing operators, a warmstart
generator with certification diagnostics, a homogeneous-embedding
interior point solver, parametric problem generators, and a
warm-versus-cold benchmark harness.
"""

from .cones import ConeKind, ConeProduct, ConeSpec
from .errors import (
    BoundaryOrExterior,
    ConepathError,
    DegenerateData,
    EigenFailure,
    EmptyInput,
    InfeasibleTarget,
    NoConvergence,
    NotApplicable,
    NumericalError,
    ParseError,
    RejectedWarmStart,
    Unsupported,
)
from .ipm import (
    ConicProblem,
    Iterate,
    Settings,
    SolveReport,
    SolveStatus,
    cold_start,
    solve,
    warm_start,
)
from .smoothing import SmoothingResult, project, project_dual, smooth, smooth_product
from .warmstart import (
    PreviousSolution,
    WarmStartResult,
    certify_central_path,
    proximity,
    residual_bound_check,
    select_parameters,
    warmstart,
)

__version__ = "0.1.0"

__all__ = [
    "ConeKind",
    "ConeProduct",
    "ConeSpec",
    "ConepathError",
    "BoundaryOrExterior",
    "DegenerateData",
    "EigenFailure",
    "EmptyInput",
    "InfeasibleTarget",
    "NoConvergence",
    "NotApplicable",
    "NumericalError",
    "ParseError",
    "RejectedWarmStart",
    "Unsupported",
    "ConicProblem",
    "Iterate",
    "Settings",
    "SolveReport",
    "SolveStatus",
    "cold_start",
    "solve",
    "warm_start",
    "SmoothingResult",
    "project",
    "project_dual",
    "smooth",
    "smooth_product",
    "PreviousSolution",
    "WarmStartResult",
    "certify_central_path",
    "proximity",
    "residual_bound_check",
    "select_parameters",
    "warmstart",
    "__version__",
]
