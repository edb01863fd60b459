"""Beta regression with a mismeasured covariate.

Estimation (naive, approximate maximum likelihood, maximum
pseudo-likelihood, regression calibration), standard errors, weighted
residual diagnostics with simulated envelopes, and a Monte Carlo harness.
"""

from .estimators import (
    FitResult,
    fit_aml,
    fit_mpl,
    fit_naive,
    fit_rc,
    pseudo_covariance_blocks,
    combine_pseudo_covariance,
    pseudo_nuisance,
    rc_nuisance,
    wald_interval,
)
from .likelihood import (
    LoglikValue,
    beta_log_density,
    loglik_approx,
    loglik_calibration,
    loglik_naive,
    loglik_pseudo,
    loglik_w_marginal,
)
from .model import (
    Dataset,
    DeltaParams,
    LinkFunction,
    Links,
    MeasurementSpec,
    ThetaParams,
    conditional_moments,
    make_links,
    mean_link,
    measurement_from_reliability,
    mu_t,
    phi_t,
    precision_link,
    reliability_ratio,
)
from .optim import OptimResult, maximize, numerical_gradient, numerical_hessian
from .quadrature import HermiteRule, hermite_rule
from .residuals import Envelope, ResidualReport, hat_matrix, simulated_envelope, weighted_residuals
from .simulate import McReport, MethodMc, SimDesign, run_monte_carlo, simulate_dataset
from .special import digamma, log_gamma, trigamma

__all__ = [
    "Dataset",
    "DeltaParams",
    "Envelope",
    "FitResult",
    "HermiteRule",
    "LinkFunction",
    "Links",
    "LoglikValue",
    "McReport",
    "MeasurementSpec",
    "MethodMc",
    "OptimResult",
    "ResidualReport",
    "SimDesign",
    "ThetaParams",
    "beta_log_density",
    "combine_pseudo_covariance",
    "conditional_moments",
    "digamma",
    "fit_aml",
    "fit_mpl",
    "fit_naive",
    "fit_rc",
    "hat_matrix",
    "hermite_rule",
    "log_gamma",
    "loglik_approx",
    "loglik_calibration",
    "loglik_naive",
    "loglik_pseudo",
    "loglik_w_marginal",
    "make_links",
    "maximize",
    "mean_link",
    "measurement_from_reliability",
    "mu_t",
    "numerical_gradient",
    "numerical_hessian",
    "phi_t",
    "precision_link",
    "pseudo_covariance_blocks",
    "pseudo_nuisance",
    "rc_nuisance",
    "reliability_ratio",
    "run_monte_carlo",
    "simulate_dataset",
    "simulated_envelope",
    "trigamma",
    "wald_interval",
    "weighted_residuals",
]

__version__ = "0.1.0"
