"""Bayesian linear regression with covariates left-censored at detection limits.

Censored covariate entries are imputed jointly from truncated multivariate
normal full conditionals inside a random-scan Gibbs sampler; prediction,
scoring, synthetic data generation, and a batch CLI sit on top.
"""

from .conditionals import (
    MissingConditional,
    beta_full_conditional,
    conditional_prior_moments,
    gamma_omega_full_conditional,
    missing_full_conditional,
    posterior_correlation,
    sigma2_full_conditional,
)
from .datagen import GenSpec, calibrate_delta, censor, censor_matrix, generate
from .evaluate import (
    ScoreReport,
    as_complete,
    compare_joint_vs_univariate,
    emit_density_data,
    ess,
    log_predictive_score,
    naive_impute,
    random_scan_efficiency,
)
from .gibbs import GibbsError, RunConfig, initialize_state, run_chain
from .model import (
    CensoredDataset,
    ChainState,
    ConfigError,
    DrawStore,
    FactorizationError,
    ModelParams,
    PriorHyper,
    default_prior,
    partition_gaussian,
    sigma2_hyper,
    validate_dataset,
)
from .predict import (
    PredictiveDraws,
    checkpoint_policy,
    predict_approximate,
    predict_exact,
)
from .tmvn import TruncatedMvnProblem, sample_tmvn, sample_truncnorm_1d, tilt_optimize

__version__ = "0.1.0"

__all__ = [
    "CensoredDataset", "ChainState", "ConfigError", "DrawStore",
    "FactorizationError", "GenSpec", "GibbsError", "MissingConditional",
    "ModelParams", "PredictiveDraws", "PriorHyper", "RunConfig", "ScoreReport",
    "TruncatedMvnProblem", "as_complete", "beta_full_conditional",
    "calibrate_delta", "censor", "censor_matrix", "checkpoint_policy",
    "compare_joint_vs_univariate", "conditional_prior_moments", "default_prior",
    "emit_density_data", "ess", "gamma_omega_full_conditional", "generate",
    "initialize_state", "log_predictive_score", "missing_full_conditional",
    "naive_impute", "partition_gaussian", "posterior_correlation",
    "predict_approximate", "predict_exact", "random_scan_efficiency",
    "run_chain", "sample_tmvn", "sample_truncnorm_1d", "sigma2_full_conditional",
    "sigma2_hyper", "tilt_optimize", "validate_dataset",
]
