"""Space-time covariance models on spheres and sphere-line products.

Construction, validation, fitting and application of positive-definite
covariance models that are isotropic on spheres and stationary on lines,
with simple kriging, Gaussian field simulation, and desk-scale variational
and ensemble data assimilation built on top.
"""

from ._backend import backend
from .assimilation import (
    AnalysisResult,
    VarProblem,
    closed_form_analysis,
    cost,
    enkf_update,
    grad_cost,
    solve_3dvar,
)
from .covariance import (
    CauchyTemporal,
    ConstantTemporal,
    EuclideanSpectralModel,
    LineFactor,
    SchoenbergSequence,
    SpaceTimeModel,
    SphereFactor,
    TableTemporal,
    TaperReport,
    TemporalFactor,
    TruncationResult,
    convex_combine,
    evaluate_series,
    evaluate_space_time_series,
    gneiting_floor,
    gneiting_minimizer,
    lagrangian_covariance,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
    separable_product,
    sequence_model,
    sequence_space_time_model,
    taper_report,
    truncate_index,
    yadrenko_lift,
)
from .errors import (
    DimensionMismatchError,
    DomainError,
    IngestError,
    InsufficientDataError,
    ModelValidationError,
    NotPositiveDefiniteError,
    NumericalError,
    SpherecovError,
)
from .fitting import (
    CorrelationBin,
    FitResult,
    decreasing_projection,
    empirical_isotropic_correlation,
    fit_nonnegative,
    monotone_shape,
    nonnegative_least_squares,
)
from .geometry import (
    ObservationRecord,
    SpaceTimePoint,
    SpherePoint,
    from_lat_lon,
    geodesic_cosine,
    geodesic_distance,
    ingest_csv,
)
from .harmonics import (
    ExtractionResult,
    GegenbauerBasis,
    eval_gegenbauer,
    eval_normalized,
    expansion_function,
    extract_coefficients,
    gegenbauer_quadrature,
    laplacian_eigenvalue,
)
from .kriging import KrigeResult, KrigingSystem, krige, krige_neighborhood
from .simulation import (
    EnsembleResult,
    enkf_ensemble,
    psd_square_root,
    random_points,
    sample_field,
)
from .validation import (
    GramMatrix,
    PsdVerdict,
    StrictnessReport,
    build_gram,
    condition_number,
    psd_check,
    quadratic_form_oracle,
    strictness_diagnostic,
)

__version__ = "0.1.0"
