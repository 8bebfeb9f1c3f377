"""pdflow: damped primal-dual flows for separable equality-constrained convex
problems, with time scaling, Tikhonov regularization, and rate certification.

The hot integration loop runs in a compiled kernel when available
(pdflow._kernels); a pure-Python stepper is the drop-in fallback.  Pin with
PDFLOW_BACKEND=compiled|python.
"""

from .analysis import (
    EnergyReport,
    IntegralEstimates,
    MetricSeries,
    RateFit,
    TikhonovPath,
    bounded_ratio,
    energies,
    fit_rate,
    integral_estimates,
    metrics,
    tikhonov_path,
)
from .dynamics import (
    SystemKind,
    SystemParams,
    SystemState,
    affine_field,
    existence_constants,
    field_closure,
    pack,
    simulate,
    unpack,
    vector_field,
)
from .integrator import (
    AffineField,
    IntegratorConfig,
    Trajectory,
    available_backends,
    default_backend,
    integrate,
    integrate_rk4,
)
from .problem import (
    OracleSpec,
    QuadraticSpec,
    ReferenceSolution,
    SeparableProblem,
    builtin,
    min_norm_solution,
    problem_from_json,
    problem_to_json,
    solve_saddle_point,
    tikhonov_minimizer,
)
from .schedules import Curve, RegimeReport, integral, validate_regimes

__version__ = "0.1.0"

__all__ = [
    "AffineField",
    "Curve",
    "EnergyReport",
    "IntegralEstimates",
    "IntegratorConfig",
    "MetricSeries",
    "OracleSpec",
    "QuadraticSpec",
    "RateFit",
    "ReferenceSolution",
    "RegimeReport",
    "SeparableProblem",
    "SystemKind",
    "SystemParams",
    "SystemState",
    "TikhonovPath",
    "Trajectory",
    "affine_field",
    "available_backends",
    "bounded_ratio",
    "builtin",
    "default_backend",
    "energies",
    "existence_constants",
    "field_closure",
    "fit_rate",
    "integral",
    "integral_estimates",
    "integrate",
    "integrate_rk4",
    "metrics",
    "min_norm_solution",
    "pack",
    "problem_from_json",
    "problem_to_json",
    "simulate",
    "solve_saddle_point",
    "tikhonov_minimizer",
    "tikhonov_path",
    "unpack",
    "validate_regimes",
    "vector_field",
    "__version__",
]
