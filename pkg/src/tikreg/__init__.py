"""Learned and classic Tikhonov regularization parameters via spectral filtering."""

from .classic import (
    DpConfig,
    SelectionResult,
    gcv_value,
    gcv_value_multi,
    residual_norm_sq,
    select_dp,
    select_gcv,
    select_gcv_multi,
    select_mse_oracle,
)
from .errors import *  # noqa: F401,F403
from .filters import (
    FilterVector,
    GsvdBasis,
    SpectralBasis,
    SvdBasis,
    apply_filtered_solution,
    coefficients,
    filter_jacobian,
    learn_optimal_error_filters,
    multi_tikhonov_filters,
    tikhonov_filter_factors,
    tikhonov_filters,
    tikhonov_filters_gsvd,
)
from .gsvd import GsvdFactors, generalized_singular_values, gsvd
from .learn import (
    TrainingSet,
    TrainResult,
    empirical_risk,
    gn_assemble,
    gn_hessian_sq2norm,
    risk_derivative_scalar,
    train_multi,
    train_scalar,
)
from .linalg import qr_reduced, solve_lls, solve_triangular, svd_thin
from .measures import ErrorMeasure, huber, parse_measure, pnorm, sq2norm
from .problems import (
    Dataset,
    Problem,
    ProblemSpec,
    generate_dataset,
    relative_error,
    summary_stats,
)
from .structured import (
    SpectralOperator,
    TransformBasis,
    build_spectral_operator,
    gaussian_psf,
    solve_multi_tikhonov_general,
    surrogate_parameters,
)

__version__ = "0.1.0"
