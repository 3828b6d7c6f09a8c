"""Differentially private split conformal prediction.

Quantile mechanisms (noisy binary search under zCDP, an exponential-mechanism
baseline), hinge-score conformal sets, the matching rank-error and coverage
bounds, and a seeded harness for the two-class Gaussian benchmark.
"""

from .bounds import coverage_bounds, rank_error_bound
from .conformal import (
    MechanismParams,
    MetricsReport,
    PredictionSet,
    calibrate,
    evaluate,
    hinge_scores,
    prediction_set,
)
from .errors import ConfigError, DomainError
from .privacy import (
    NoiseSpec,
    PrivacyBudget,
    epsilon_to_rho,
    noisy_range_count,
    per_call_noise_sd,
    rho_to_epsilon,
)
from .quantile import (
    QuantileResult,
    ScoreSet,
    exponq_quantile,
    exponq_tune,
    max_iterations,
    nonprivate_quantile,
    pcoqs_quantile,
    target_rank,
)

__version__ = "0.1.0"
