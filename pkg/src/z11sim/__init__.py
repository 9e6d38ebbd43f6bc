"""Matrix-free spectral solver and simulator for the planar
multiplier-transport model w_t = (Z11 w) w.

The package constructs the singular self-similar profile Q by solving the
restricted multiplier equation Z11 Q = 1 on a bounded set with conjugate
gradient, verifies the profile identity (Z11 Q) Q = Q, and integrates the
model in time to observe self-similar and generic finite-time blow-up.
"""

from .config import (
    COMMANDS,
    ConfigError,
    InitialSpec,
    RunConfig,
    load_run_config,
    parse_shape,
)
from .diagnostics import (
    cone_mass_study,
    multiplier_identity_report,
    negation_symmetry_error,
    run_diagnostics,
)
from .evolution import (
    EvolutionTrace,
    EvolveConfig,
    NumericalInstabilityError,
    StepResult,
    StepUnderflowError,
    estimate_blowup_time,
    evolve,
    gaussian_bump,
    rhs,
    rk_step,
    self_similar_deviation,
    step,
)
from .fieldio import (
    FieldFileError,
    FieldHeader,
    read_field,
    read_header,
    read_trace_csv,
    write_field,
    write_trace_csv,
)
from .profile import (
    ConvergenceError,
    CurvatureBreakdownError,
    ProfileReport,
    ProfileSolution,
    RestrictedOperator,
    SingularOperatorError,
    apply_L,
    dense_L_matrix,
    estimate_coercivity,
    solve_profile,
    verify_profile,
)
from .shapes import (
    Annulus,
    Disk,
    Ellipse,
    Mask,
    Rectangle,
    ShapeDifference,
    ShapeSpec,
    ShapeUnion,
    mask_area,
    rasterize,
    shape_contains,
)
from .spectral import (
    Grid,
    RealField,
    SpectralField,
    apply_z11,
    apply_z22,
    cone_mass_ratio,
    fft_forward,
    fft_inverse,
    field_integral,
    inner,
    l2_norm,
    make_grid,
    quadratic_form,
    sup_norm,
)

__version__ = "0.1.0"

__all__ = [
    "Annulus",
    "COMMANDS",
    "ConfigError",
    "ConvergenceError",
    "CurvatureBreakdownError",
    "Disk",
    "Ellipse",
    "EvolutionTrace",
    "EvolveConfig",
    "FieldFileError",
    "FieldHeader",
    "Grid",
    "InitialSpec",
    "Mask",
    "NumericalInstabilityError",
    "ProfileReport",
    "ProfileSolution",
    "RealField",
    "Rectangle",
    "RestrictedOperator",
    "RunConfig",
    "ShapeDifference",
    "ShapeSpec",
    "ShapeUnion",
    "SingularOperatorError",
    "SpectralField",
    "StepResult",
    "StepUnderflowError",
    "apply_L",
    "apply_z11",
    "apply_z22",
    "cone_mass_ratio",
    "cone_mass_study",
    "dense_L_matrix",
    "estimate_blowup_time",
    "estimate_coercivity",
    "evolve",
    "fft_forward",
    "fft_inverse",
    "field_integral",
    "gaussian_bump",
    "inner",
    "l2_norm",
    "load_run_config",
    "make_grid",
    "mask_area",
    "multiplier_identity_report",
    "negation_symmetry_error",
    "parse_shape",
    "quadratic_form",
    "rasterize",
    "read_field",
    "read_header",
    "read_trace_csv",
    "rhs",
    "rk_step",
    "run_diagnostics",
    "self_similar_deviation",
    "shape_contains",
    "solve_profile",
    "step",
    "sup_norm",
    "verify_profile",
    "write_field",
    "write_trace_csv",
]
