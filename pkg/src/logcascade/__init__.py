"""Log-normal multiplicative cascades with log-correlated volatility.

Gaussian log-volatility fields (stationary and aging kernels), the cascade
measure and walk they generate, and estimators of magnitude correlations
whose apparent integral scale grows with the observation window.
"""

__version__ = "0.1.0"

from .cascade_measure import (
    MeasurePath,
    MrwPath,
    build_measure,
    build_mrw,
    convergence_diagnostic,
    exact_increment_moment2,
    exact_moment2,
    self_similarity_factor,
    zeta,
)
from .cone import sample_coupled_cone, sample_path_cone
from .errors import (
    CascadeError,
    EstimationError,
    InputDataError,
    MeasureOverflowError,
    ParameterError,
    QuadratureError,
    SynthesisError,
)
from .estimators import (
    CovarianceEstimate,
    MagnitudeSeries,
    ScalingFit,
    StructureFunctions,
    concavity_check,
    expected_bias_exact,
    expected_cov_approx,
    fit_log_decay,
    integral_scale_bound,
    integral_scale_scan,
    magnitude_covariance,
    magnitude_from_field,
    magnitude_from_measure,
    structure_functions,
    subsampled_covariance,
)
from .gaussian_field import (
    CascadeParams,
    GaussianLogVolPath,
    TimeGrid,
    cov_nonstationary,
    cov_stationary,
    increment_cov,
    mean_nonstationary,
    mean_stationary,
    sample_path,
    sample_path_blocks,
    sample_paths,
)
from .market_data import OhlcRecord, magnitude_series, parse_ohlc
