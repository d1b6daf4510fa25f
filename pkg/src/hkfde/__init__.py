"""Cauchy problems for the Hilfer-Katugampola fractional derivative.

Solve, continue and bound solutions through the equivalent Volterra
equation, working in the transformed variable ``s = t**rho / rho``.
"""
from .continuation import (
    CertificateReport,
    ContinuationOptions,
    ContinuationReport,
    blowup_functional,
    check_global_certificate,
    continue_solution,
    envelope_bound,
    gronwall_bound,
    stitched_residual,
)
from .errors import (
    CertificateInputError,
    ConfigError,
    EmptyDomainError,
    HKFDEError,
    IncompatibleInputError,
    InsufficientGridError,
    ParameterDomainError,
    RegimeError,
    RhsEvaluationError,
)
from .expr import compile_function, compile_rhs, evaluate, parse, to_text
from .fracore import (
    CauchyProblem,
    FhkParams,
    SGrid,
    WeightedTrajectory,
    derive_gamma,
    weighted_distance,
    weighted_norm,
)
from .operators import hilfer_katugampola_derivative, katugampola_derivative, katugampola_integral
from .oracle import MLSeries, classical_reduction_solve, linear_solution, mittag_leffler, ml_series
from .quadrature import KernelWeights, apply_row, build_weights, row_weights
from .volterra import (
    SolveOptions,
    SolveReport,
    estimate_L,
    fixed_point_residual,
    local_radius,
    local_radius_printed,
    picard_solve,
    picard_solve_system,
    volterra_rhs,
)

__version__ = "0.1.0"
