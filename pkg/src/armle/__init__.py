"""Exact Gaussian likelihood inference for AR(p) with stationary dependent noise.

The model is X_n = theta_1 X_{n-1} + ... + theta_p X_{n-p} + xi_n with zero
pre-sample values, where (xi_n) is a stationary centered Gaussian process
with a known covariance kernel.  The package whitens the noise with the
Durbin-Levinson recursion, evaluates the exact likelihood through a
2p-dimensional filtered state, solves the closed-form MLE, and provides the
likelihood-ratio test, the local quadratic likelihood expansion, and a Monte
Carlo harness that checks the asymptotic behavior of all of these.
"""
from .ar import (
    STABILITY_MARGIN,
    StabilityResult,
    apply_ar,
    as_theta,
    characteristic_roots,
    companion,
    fisher_info,
    fisher_info_inverse,
    is_stable,
    require_stable,
    simulate_series,
    stability,
)
from .exceptions import (
    ArmleError,
    DimensionMismatch,
    NotPositiveDefinite,
    RootSolverNoConverge,
    SingularGram,
    TooShort,
    Unstable,
)
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentReport,
    aggregate,
    run_clt,
    run_consistency,
    run_experiment,
    run_lan_remainder,
    run_lil,
    run_qsl,
    run_test_power,
    run_test_size,
)
from .filtering import (
    VARIANCE_FLOOR,
    FilterState,
    advance,
    kernel_rows,
    pacf_and_variances,
    whiten,
)
from .inference import (
    GRAM_CONDITION_CAP,
    ConfidenceEllipsoid,
    EstimationResult,
    TestResult,
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    confidence_ellipsoid,
    lan_decomposition,
    lr_statistic,
    lr_test,
    mle,
    noncentral_chi2_sf,
)
from .noise import (
    CovarianceKernel,
    NoisePath,
    ValidationReport,
    ar1,
    covariance,
    fgn,
    kernel_from_json,
    kernel_to_json,
    noise_from_innovations,
    sample_noise,
    validate_kernel,
    white,
    write_noise_csv,
)
from .rng import standard_normals, substream
from .state import (
    FilteredPath,
    ScoreAccumulator,
    accumulate,
    filter_observations,
    gram_moment,
    innovations,
    log_likelihood,
    score_weights,
    transition,
    write_state_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ArmleError",
    "CovarianceKernel",
    "ConfidenceEllipsoid",
    "DimensionMismatch",
    "EstimationResult",
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentReport",
    "FilterState",
    "FilteredPath",
    "GRAM_CONDITION_CAP",
    "NoisePath",
    "NotPositiveDefinite",
    "RootSolverNoConverge",
    "STABILITY_MARGIN",
    "ScoreAccumulator",
    "SingularGram",
    "StabilityResult",
    "TestResult",
    "TooShort",
    "Unstable",
    "VARIANCE_FLOOR",
    "ValidationReport",
    "accumulate",
    "advance",
    "aggregate",
    "apply_ar",
    "ar1",
    "as_theta",
    "characteristic_roots",
    "chi2_cdf",
    "chi2_quantile",
    "chi2_sf",
    "companion",
    "confidence_ellipsoid",
    "covariance",
    "fgn",
    "filter_observations",
    "fisher_info",
    "fisher_info_inverse",
    "gram_moment",
    "innovations",
    "is_stable",
    "kernel_from_json",
    "kernel_rows",
    "kernel_to_json",
    "lan_decomposition",
    "log_likelihood",
    "lr_statistic",
    "lr_test",
    "mle",
    "noise_from_innovations",
    "noncentral_chi2_sf",
    "pacf_and_variances",
    "require_stable",
    "run_clt",
    "run_consistency",
    "run_experiment",
    "run_lan_remainder",
    "run_lil",
    "run_qsl",
    "run_test_power",
    "run_test_size",
    "sample_noise",
    "score_weights",
    "simulate_series",
    "stability",
    "standard_normals",
    "substream",
    "transition",
    "validate_kernel",
    "white",
    "whiten",
    "write_noise_csv",
    "write_state_csv",
]
