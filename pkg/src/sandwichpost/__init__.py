"""Misspecification-robust sandwich inference.

The plug-in sandwich covariance gives asymptotically valid intervals for
the pseudo-true parameter of a wrong-but-useful working model, but its
point estimates of the score covariance understate uncertainty at small
sample sizes.  This package also provides the Bayesian counterpart: a
likelihood built from the sampling distribution of the MLE and the score
sum-of-squares, sampled by a two-block Gibbs sweep under conjugate priors,
plus a Monte Carlo harness measuring interval coverage under a
heteroscedastic regression data-generating process.
"""
from .bayes import (
    GibbsChain,
    ImproperUniform,
    InverseWishartPrior,
    JeffreysPrior,
    NormalPrior,
    PointMassPrior,
    PriorSpec,
    gibbs_step_B,
    gibbs_step_theta,
    plugin_posterior_interval,
    posterior_interval,
    run_gibbs,
)
from .errors import (
    DimensionMismatch,
    DofTooSmall,
    EmptyInput,
    MomentOnBoundary,
    NoConvergence,
    NotPositiveDefinite,
    ReplicateFailure,
    SandwichPostError,
    SingularDesign,
)
from .models import (
    FiniteExpFamily,
    LinearRegression,
    RegressionObs,
    WorkingModel,
    expfam_pseudo_true,
    kl_oracle_pseudo_true,
)
from .sandwich import SandwichFit, compute_A, compute_S, sandwich_cov, wald_interval
from .stochastics import (
    cholesky,
    empirical_quantile,
    inv_spd,
    normal_quantile,
    rng_stream,
    sample_mvnorm,
    sample_wishart,
    solve_spd,
    symmetrize,
)
from .study import (
    ChainConfig,
    DgpConfig,
    StudyCell,
    generate_dataset,
    informative_prior,
    naive_model_interval,
    run_cell,
    run_naive_cell,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "DgpConfig",
    "DimensionMismatch",
    "DofTooSmall",
    "EmptyInput",
    "FiniteExpFamily",
    "GibbsChain",
    "ImproperUniform",
    "InverseWishartPrior",
    "JeffreysPrior",
    "LinearRegression",
    "MomentOnBoundary",
    "NoConvergence",
    "NormalPrior",
    "NotPositiveDefinite",
    "PointMassPrior",
    "PriorSpec",
    "RegressionObs",
    "ReplicateFailure",
    "SandwichFit",
    "SandwichPostError",
    "SingularDesign",
    "StudyCell",
    "WorkingModel",
    "cholesky",
    "compute_A",
    "compute_S",
    "empirical_quantile",
    "expfam_pseudo_true",
    "generate_dataset",
    "gibbs_step_B",
    "gibbs_step_theta",
    "informative_prior",
    "inv_spd",
    "kl_oracle_pseudo_true",
    "naive_model_interval",
    "normal_quantile",
    "plugin_posterior_interval",
    "posterior_interval",
    "rng_stream",
    "run_cell",
    "run_gibbs",
    "run_naive_cell",
    "run_study",
    "sample_mvnorm",
    "sample_wishart",
    "sandwich_cov",
    "solve_spd",
    "symmetrize",
    "wald_interval",
]
