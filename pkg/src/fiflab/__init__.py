"""Fractal interpolation lab: build vector-valued fractal interpolation
systems, render their graphs, sample invariant measures, estimate fractal
dimensions against the theoretical bounds, and take fractional integrals."""

from .core import (
    Address,
    AffineForcing,
    ContractionRatios,
    FifBranch,
    FifSystem,
    ForcingFunction,
    GraphSample,
    InterpolationData,
    PolynomialForcing,
    SampledForcing,
    ValidationReport,
    Violation,
    affine_forcing,
    build_system,
    contraction_ratios,
    derive_base_maps,
    evaluate_at_address,
    evaluate_fif,
    rb_apply,
    self_referential_residual,
    validate_system,
)
from .dimension import (
    DimensionReport,
    HolderEstimate,
    MoranRoot,
    ProjectionReport,
    SpacePredicateReport,
    box_count_mesh,
    box_count_oscillation,
    default_scales,
    holder_estimate,
    moran_solve,
    oscillation_sum,
    projection_monotonicity,
    space_predicates,
    total_variation,
    upper_box_cap,
    v_alpha_seminorm,
)
from .errors import (
    ConvergenceWarning,
    DataValidationError,
    FifError,
    GridError,
    ScalingError,
    UnsupportedCaseError,
)
from .fracint import (
    FracIntSystem,
    FractionalDimensionReport,
    IdentityCheck,
    derive_fractional_ifs,
    fractional_dimension_report,
    gamma_eval,
    rl_at,
    rl_integral,
    singular_kernel_integral,
    verify_fractional_identity,
)
from .measures import (
    EmpiricalMeasure,
    LocalDimReport,
    MeasureBounds,
    ProbabilityVector,
    ball_mass,
    chaos_game,
    cylinder_mass,
    default_radii,
    entropy_dimension_bound,
    local_dimension,
    measure_dim_bounds,
)

__version__ = "0.1.0"
