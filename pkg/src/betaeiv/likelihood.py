"""Log-likelihood variants for the errors-in-variables beta regression model.

All functions return a :class:`LoglikValue` holding the total and the
per-observation terms. The joint likelihood decomposes into a normal
marginal for the surrogates plus a conditional term whose integral over the
latent covariate is approximated by Gauss-Hermite quadrature; the inner
node sum is evaluated with log-sum-exp so that large precision values do
not overflow.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import (
    Dataset,
    DeltaParams,
    Links,
    MeasurementSpec,
    ThetaParams,
    conditional_moments,
)
from .quadrature import SQRT_PI, HermiteRule
from .exceptions import DegenerateModelError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LoglikValue:
    """A log-likelihood total together with its per-observation terms."""

    value: float
    terms: Optional[np.ndarray] = None

    def __float__(self):
        return self.value


def beta_log_density(y, mu, phi):
    """Log-density of a beta variable parameterized by mean and precision.

    Vectorized over broadcastable arguments. ``y`` must lie strictly inside
    (0, 1); ``mu`` and ``phi`` are assumed valid (the link inverses clamp
    them away from the boundaries).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0) or np.any(y >= 1.0) or not np.all(np.isfinite(y)):
        raise ValueError("y must lie strictly inside (0, 1)")
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    a = mu * phi
    b = (1.0 - mu) * phi
    out = (
        gammaln(phi)
        - gammaln(a)
        - gammaln(b)
        + (a - 1.0) * np.log(y)
        + (b - 1.0) * np.log1p(-y)
    )
    return out if out.ndim else float(out)


def _marginal_terms(w, delta: DeltaParams, meas: MeasurementSpec) -> np.ndarray:
    s = meas.tau1**2 * delta.sigma2_x + meas.sigma2_e
    if s <= 0.0:
        raise DegenerateModelError("surrogate marginal variance must be positive")
    resid = w - (meas.tau0 + meas.tau1 * delta.mu_x)
    return -0.5 * (_LOG_2PI + np.log(s)) - resid**2 / (2.0 * s)


def loglik_w_marginal(
    dataset: Dataset, delta: DeltaParams, meas: MeasurementSpec
) -> LoglikValue:
    """Normal log-likelihood of the surrogates under the structural model."""
    terms = _marginal_terms(dataset.w, delta, meas)
    return LoglikValue(value=float(np.sum(terms)), terms=terms)


def _conditional_terms(
    dataset: Dataset,
    theta: ThetaParams,
    delta: DeltaParams,
    meas: MeasurementSpec,
    rule: HermiteRule,
    links: Links,
) -> np.ndarray:
    """Per-observation log of the quadrature sum over the latent covariate.

    With zero conditional variance every node collapses onto the calibrated
    covariate and the quadrature is bypassed, making the error-free limit
    exact.
    """
    mu_xw, var_xw = conditional_moments(dataset.w, delta, meas)
    eta_mu_base = dataset.Z @ theta.alpha
    eta_phi_base = dataset.V @ theta.gamma
    if var_xw == 0.0:
        mu = links.mean.inverse(eta_mu_base + theta.beta * mu_xw)
        eta_phi = eta_phi_base if theta.lam is None else eta_phi_base + theta.lam * mu_xw
        phi = links.precision.inverse(eta_phi)
        return beta_log_density(dataset.y, mu, phi)

    xstar = mu_xw[:, None] + np.sqrt(2.0 * var_xw) * rule.nodes[None, :]
    mu = links.mean.inverse(eta_mu_base[:, None] + theta.beta * xstar)
    if theta.lam is None:
        phi = links.precision.inverse(eta_phi_base)[:, None]
    else:
        phi = links.precision.inverse(eta_phi_base[:, None] + theta.lam * xstar)
    lker = beta_log_density(dataset.y[:, None], mu, phi)
    # weights may underflow to zero at extreme nodes of large rules;
    # passing them multiplicatively keeps those terms out without warnings
    return logsumexp(lker, axis=1, b=rule.weights[None, :] / SQRT_PI)


def loglik_approx(
    dataset: Dataset,
    theta: ThetaParams,
    delta: DeltaParams,
    meas: MeasurementSpec,
    rule: HermiteRule,
    links: Links = None,
) -> LoglikValue:
    """Quadrature-approximated joint log-likelihood of (theta, delta).

    Sum of the surrogate marginal terms and the per-observation log of the
    Gauss-Hermite node sum over the conditional beta kernel.
    """
    links = links or Links()
    terms = _marginal_terms(dataset.w, delta, meas) + _conditional_terms(
        dataset, theta, delta, meas, rule, links
    )
    return LoglikValue(value=float(np.sum(terms)), terms=terms)


def loglik_pseudo(
    dataset: Dataset,
    theta: ThetaParams,
    delta_hat: DeltaParams,
    meas: MeasurementSpec,
    rule: HermiteRule,
    links: Links = None,
) -> LoglikValue:
    """Pseudo-log-likelihood: the joint likelihood with the nuisance frozen
    at ``delta_hat``. Numerically identical to :func:`loglik_approx` at the
    same point; kept separate because it is the step-two objective of the
    two-step estimator."""
    return loglik_approx(dataset, theta, delta_hat, meas, rule, links)


def loglik_calibration(
    dataset: Dataset, theta: ThetaParams, x_tilde, links: Links = None
) -> LoglikValue:
    """Beta log-likelihood with the latent covariate replaced by ``x_tilde``."""
    links = links or Links()
    x = np.asarray(x_tilde, dtype=float)
    if x.shape != dataset.w.shape or not np.all(np.isfinite(x)):
        raise ValueError("x_tilde must be a finite vector of length n")
    mu = links.mean.inverse(dataset.Z @ theta.alpha + theta.beta * x)
    eta_phi = dataset.V @ theta.gamma
    if theta.lam is not None:
        eta_phi = eta_phi + theta.lam * x
    phi = links.precision.inverse(eta_phi)
    terms = beta_log_density(dataset.y, mu, phi)
    return LoglikValue(value=float(np.sum(terms)), terms=terms)


def loglik_naive(dataset: Dataset, theta: ThetaParams, links: Links = None) -> LoglikValue:
    """Ordinary beta regression log-likelihood using the surrogate as the
    covariate in both submodels."""
    return loglik_calibration(dataset, theta, dataset.w, links)
