"""Recursive training on mixed real and synthetic data.

Simulators for three recursive estimation settings (Gaussian mean and
covariance, generalised linear models, empirical CDFs), the closed-form
limiting errors and optimal weights that go with them, and a small Monte
Carlo harness.
"""

from ._version import __version__
from .analytics import (
    GOLDEN_WEIGHT,
    CovLimit,
    Regime,
    c_factor,
    cdf_error_at,
    cdf_improvement_threshold,
    cdf_limit_error,
    cdf_optimal_weight,
    classify_regime,
    cov_divergence_threshold,
    cov_opnorm_beta,
    gaussian_cov_error_at,
    gaussian_cov_limit,
    gaussian_cov_limit_finite,
    gaussian_cov_optimal_weight,
    gaussian_mean_error_at,
    gaussian_mean_limit,
    glm_limit_error,
    glm_scaled_error,
    glm_scaled_error_naive,
    glm_scaled_error_optimal,
    naive_weight,
    optimal_weight,
)
from .cdf import WeightedEcdf, combine_ecdf, cvm_error, run_cdf_chain, run_cdf_chains, sample_from_ecdf
from .config import MixConfig
from .errors import *  # noqa: F401,F403
from .gaussian import GaussianModel, run_gaussian_chain, run_gaussian_chains
from .glm import (
    GlmFamily,
    GlmProblem,
    fit_weighted_mle,
    glm_response,
    run_glm_chain,
    run_glm_chains,
    trace_inverse_fisher,
)
from .harness import ScenarioConfig, SweepPoint, SweepResult, run_scenario, tail_limit_estimate
from .linalg_stats import RngStream, cholesky, sample_cov, sample_mean, sample_mvn
