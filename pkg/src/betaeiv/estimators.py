"""The four fitting procedures and their covariance estimates.

* naive: ordinary beta regression treating the surrogate as the true
  covariate; covariance from the inverse observed information.
* rc: regression calibration; the latent covariate is replaced by its
  estimated conditional mean and an ordinary beta regression is fitted;
  standard errors via parametric bootstrap (or observed information when
  the bootstrap is disabled).
* mpl: maximum pseudo-likelihood; the nuisance parameters are estimated in
  closed form from the surrogate marginal and frozen, then the interest
  parameters maximize the quadrature likelihood; covariance from the
  two-step sandwich.
* aml: approximate maximum likelihood; joint maximization of the
  quadrature likelihood over interest and nuisance parameters, covariance
  from the inverse observed information of the joint fit.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import (
    CalibrationInfeasibleError,
    EvaluationError,
    InfeasibleNuisanceError,
)
from .likelihood import (
    _marginal_terms,
    loglik_approx,
    loglik_calibration,
    loglik_naive,
    loglik_pseudo,
)
from .model import (
    Dataset,
    DeltaParams,
    Links,
    MeasurementSpec,
    ThetaParams,
    conditional_moments,
    mu_t,
    phi_t,
)
from .optim import _GRAD_STEP, maximize, numerical_hessian
from .quadrature import HermiteRule, hermite_rule
from .sampling import make_rng, draw_beta


@dataclass
class FitResult:
    """Estimates, covariance, and diagnostics for one fitting method.

    ``param_names`` orders the reported parameters; for the joint maximum
    likelihood fit the nuisance parameters (mu_x, sigma2_x) are reported
    after the interest parameters. ``cov_method`` records how the
    covariance was obtained.
    """

    method: str
    theta_hat: ThetaParams
    delta_hat: Optional[DeltaParams]
    covariance: np.ndarray
    standard_errors: np.ndarray
    loglik: float
    converged: bool
    param_names: List[str]
    cov_method: str
    n_boot: Optional[int] = None
    n_iterations: int = 0

    def estimates(self) -> np.ndarray:
        vec = self.theta_hat.to_array()
        if self.method == "aml" and self.delta_hat is not None:
            vec = np.concatenate([vec, self.delta_hat.to_array()])
        return vec

    def theta_standard_errors(self) -> np.ndarray:
        return self.standard_errors[: self.theta_hat.n_params]


def wald_interval(estimate: float, se: float, level: float):
    """Normal-theory confidence interval estimate +/- z * se."""
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    if se < 0.0 or not np.isfinite(se):
        raise ValueError("standard error must be a nonnegative finite number")
    z = float(ndtri(0.5 * (1.0 + level)))
    return (estimate - z * se, estimate + z * se)


def two_sided_p_value(z: float) -> float:
    """p-value of a two-sided normal test at statistic ``z``."""
    return float(2.0 * (1.0 - ndtr(abs(z))))


def _cov_from_information(info: np.ndarray):
    """Invert an observed information matrix, falling back to the
    pseudo-inverse when it is numerically singular."""
    info = 0.5 * (info + info.T)
    try:
        cov = np.linalg.inv(info)
        ok = np.all(np.isfinite(cov))
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        cov = np.linalg.pinv(info)
    cov = 0.5 * (cov + cov.T)
    return cov, bool(ok)


def _standard_errors(cov: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(np.diag(cov), 0.0))


def _initial_theta(dataset: Dataset, x_col, links: Links, has_lam: bool) -> ThetaParams:
    """Least-squares starting values on the link scale, with a moment-based
    precision intercept."""
    X = np.column_stack([dataset.Z, np.asarray(x_col, dtype=float)])
    ystar = links.mean.forward(dataset.y)
    coef, *_ = np.linalg.lstsq(X, ystar, rcond=None)
    fitted = X @ coef
    dof = max(dataset.n - X.shape[1], 1)
    s2 = max(float(np.sum((ystar - fitted) ** 2)) / dof, 1e-10)
    mu0 = links.mean.inverse(fitted)
    var_y = s2 / links.mean.deriv(mu0) ** 2
    phi_bar = float(
        np.mean(np.clip(mu0 * (1.0 - mu0) / np.maximum(var_y, 1e-12) - 1.0, 1.0, 1e6))
    )
    gamma0 = np.zeros(dataset.V.shape[1])
    gamma0[0] = float(links.precision.forward(phi_bar))
    p_a = dataset.Z.shape[1]
    return ThetaParams(
        alpha=coef[:p_a],
        beta=float(coef[p_a]),
        gamma=gamma0,
        lam=0.0 if has_lam else None,
    )


def _maximize_theta(value_fn, theta0: ThetaParams, tol, max_iter, compute_hessian):
    p_a, p_g, has_lam = theta0.p_alpha, theta0.p_gamma, theta0.has_lam

    def obj(vec):
        return value_fn(ThetaParams.from_array(vec, p_a, p_g, has_lam))

    res = maximize(
        obj, theta0.to_array(), tol=tol, max_iter=max_iter, compute_hessian=compute_hessian
    )
    theta_hat = ThetaParams.from_array(res.x, p_a, p_g, has_lam)
    return res, theta_hat


def fit_naive(
    dataset: Dataset,
    links: Links = None,
    rule: HermiteRule = None,  # unused; kept for signature parity with the other fits
    varying_precision: bool = True,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> FitResult:
    """Ordinary beta regression using the surrogate as the covariate."""
    links = links or Links()
    theta0 = _initial_theta(dataset, dataset.w, links, varying_precision)
    res, theta_hat = _maximize_theta(
        lambda th: loglik_naive(dataset, th, links).value,
        theta0,
        tol,
        max_iter,
        compute_hessian=True,
    )
    cov, ok = _cov_from_information(res.hessian)
    return FitResult(
        method="naive",
        theta_hat=theta_hat,
        delta_hat=None,
        covariance=cov,
        standard_errors=_standard_errors(cov),
        loglik=loglik_naive(dataset, theta_hat, links).value,
        converged=bool(res.converged and ok),
        param_names=theta_hat.names(),
        cov_method="observed_information",
        n_iterations=res.iterations,
    )


def rc_nuisance(dataset: Dataset, meas: MeasurementSpec) -> DeltaParams:
    """Moment estimates of the nuisance parameters used by regression
    calibration: sample mean and (n-1)-divisor sample variance of the
    surrogate."""
    wbar = float(np.mean(dataset.w))
    s2w = float(np.var(dataset.w, ddof=1))
    sigma2_x = (s2w - meas.sigma2_e) / meas.tau1**2
    if sigma2_x <= 0.0:
        raise CalibrationInfeasibleError(
            f"surrogate sample variance s2_w={s2w:.6g} does not exceed the "
            f"measurement error variance sigma2_e={meas.sigma2_e:.6g}; "
            "no positive latent variance is implied"
        )
    return DeltaParams(mu_x=(wbar - meas.tau0) / meas.tau1, sigma2_x=sigma2_x)


def pseudo_nuisance(dataset: Dataset, meas: MeasurementSpec) -> DeltaParams:
    """Closed-form maximizer of the reduced (surrogate marginal) likelihood:
    mean (wbar - tau0)/tau1 and variance with divisor n."""
    wbar = float(np.mean(dataset.w))
    s2w_n = float(np.var(dataset.w, ddof=0))
    sigma2_x = (s2w_n - meas.sigma2_e) / meas.tau1**2
    if sigma2_x <= 0.0:
        raise InfeasibleNuisanceError(
            f"surrogate variance (divisor n) {s2w_n:.6g} does not exceed "
            f"sigma2_e={meas.sigma2_e:.6g}; the nuisance variance estimate "
            "is non-positive"
        )
    return DeltaParams(mu_x=(wbar - meas.tau0) / meas.tau1, sigma2_x=sigma2_x)


def _fit_calibration(dataset, x_tilde, links, varying_precision, tol, max_iter,
                     theta0=None, compute_hessian=True):
    theta0 = theta0 or _initial_theta(dataset, x_tilde, links, varying_precision)
    return _maximize_theta(
        lambda th: loglik_calibration(dataset, th, x_tilde, links).value,
        theta0,
        tol,
        max_iter,
        compute_hessian=compute_hessian,
    )


def fit_rc(
    dataset: Dataset,
    meas: MeasurementSpec,
    links: Links = None,
    n_boot: int = 200,
    seed: int = 0,
    varying_precision: bool = True,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> FitResult:
    """Regression calibration with parametric-bootstrap standard errors.

    With ``n_boot`` = 0 the covariance comes from the inverse observed
    information of the calibrated likelihood instead (and is labeled as
    such via ``cov_method``); the point estimates are unaffected.
    """
    if n_boot < 0:
        raise ValueError("n_boot must be nonnegative")
    links = links or Links()
    delta_tilde = rc_nuisance(dataset, meas)
    x_tilde, _ = conditional_moments(dataset.w, delta_tilde, meas)
    res, theta_hat = _fit_calibration(
        dataset, x_tilde, links, varying_precision, tol, max_iter,
        compute_hessian=(n_boot == 0),
    )
    loglik = loglik_calibration(dataset, theta_hat, x_tilde, links).value

    if n_boot == 0:
        cov, ok = _cov_from_information(res.hessian)
        cov_method = "observed_information"
        converged = bool(res.converged and ok)
    else:
        draws = _rc_bootstrap(
            dataset, meas, theta_hat, delta_tilde, links, n_boot, seed,
            varying_precision, tol, max_iter,
        )
        if draws.shape[0] >= 2:
            cov = np.atleast_2d(np.cov(draws, rowvar=False, ddof=1))
            cov_method = "parametric_bootstrap"
            converged = bool(res.converged)
        else:
            # bootstrap collapsed (all replicates failed); fall back
            h = numerical_hessian(
                lambda v: loglik_calibration(
                    dataset,
                    ThetaParams.from_array(v, theta_hat.p_alpha, theta_hat.p_gamma,
                                           theta_hat.has_lam),
                    x_tilde,
                    links,
                ).value,
                theta_hat.to_array(),
            )
            cov, ok = _cov_from_information(-h)
            cov_method = "observed_information"
            converged = False
    return FitResult(
        method="rc",
        theta_hat=theta_hat,
        delta_hat=delta_tilde,
        covariance=cov,
        standard_errors=_standard_errors(cov),
        loglik=loglik,
        converged=converged,
        param_names=theta_hat.names(),
        cov_method=cov_method,
        n_boot=n_boot,
        n_iterations=res.iterations,
    )


def _rc_bootstrap(dataset, meas, theta_hat, delta_tilde, links, n_boot, seed,
                  varying_precision, tol, max_iter):
    """Simulate (x, w, y) from the fitted calibration model, refit per
    replicate, and collect the interest-parameter draws."""
    n = dataset.n
    rows = []
    for b in range(n_boot):
        rng = make_rng(seed, b)
        x_b = delta_tilde.mu_x + np.sqrt(delta_tilde.sigma2_x) * rng.standard_normal(n)
        e_b = (
            np.sqrt(meas.sigma2_e) * rng.standard_normal(n)
            if meas.sigma2_e > 0
            else np.zeros(n)
        )
        w_b = meas.tau0 + meas.tau1 * x_b + e_b
        mu_b = mu_t(theta_hat, dataset.Z, x_b, links.mean)
        phi_b = phi_t(theta_hat, dataset.V, x_b, links.precision)
        y_b = draw_beta(rng, mu_b, phi_b)
        try:
            ds_b = Dataset(y=y_b, Z=dataset.Z, V=dataset.V, w=w_b)
            delta_b = rc_nuisance(ds_b, meas)
            x_t_b, _ = conditional_moments(ds_b.w, delta_b, meas)
            res_b, theta_b = _fit_calibration(
                ds_b, x_t_b, links, varying_precision, tol, max_iter,
                theta0=theta_hat, compute_hessian=False,
            )
        except (CalibrationInfeasibleError, EvaluationError):
            continue
        if res_b.converged:
            rows.append(theta_b.to_array())
    return np.asarray(rows, dtype=float).reshape(len(rows), -1)


def fit_mpl(
    dataset: Dataset,
    meas: MeasurementSpec,
    links: Links = None,
    rule: HermiteRule = None,
    varying_precision: bool = True,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> FitResult:
    """Two-step maximum pseudo-likelihood with sandwich covariance."""
    links = links or Links()
    rule = rule or hermite_rule(50)
    delta_hat = pseudo_nuisance(dataset, meas)
    theta0 = fit_naive(dataset, links, varying_precision=varying_precision,
                       tol=tol, max_iter=max_iter).theta_hat
    res, theta_hat = _maximize_theta(
        lambda th: loglik_pseudo(dataset, th, delta_hat, meas, rule, links).value,
        theta0,
        tol,
        max_iter,
        compute_hessian=False,
    )
    blocks = pseudo_covariance_blocks(dataset, theta_hat, delta_hat, meas, rule, links)
    cov = combine_pseudo_covariance(*blocks)
    return FitResult(
        method="mpl",
        theta_hat=theta_hat,
        delta_hat=delta_hat,
        covariance=cov,
        standard_errors=_standard_errors(cov),
        loglik=loglik_pseudo(dataset, theta_hat, delta_hat, meas, rule, links).value,
        converged=bool(res.converged),
        param_names=theta_hat.names(),
        cov_method="pseudo_sandwich",
        n_iterations=res.iterations,
    )


def pseudo_covariance_blocks(
    dataset: Dataset,
    theta: ThetaParams,
    delta: DeltaParams,
    meas: MeasurementSpec,
    rule: HermiteRule,
    links: Links = None,
):
    """Observed-information blocks and the reduced-likelihood score outer
    product entering the two-step sandwich.

    Returns ``(I_tt, I_td, I_dd, S_dd)``: the (theta, theta), (theta,
    delta) and (delta, delta) blocks of the observed information of the
    joint quadrature likelihood, and the outer product of per-observation
    numerical scores of the surrogate marginal at ``delta``.
    """
    links = links or Links()
    k = theta.n_params
    p_a, p_g, has_lam = theta.p_alpha, theta.p_gamma, theta.has_lam

    def joint(vec):
        if vec[k + 1] <= 0.0:
            return -np.inf
        th = ThetaParams.from_array(vec[:k], p_a, p_g, has_lam)
        de = DeltaParams(mu_x=vec[k], sigma2_x=vec[k + 1])
        return loglik_approx(dataset, th, de, meas, rule, links).value

    point = np.concatenate([theta.to_array(), delta.to_array()])
    info = -numerical_hessian(joint, point)
    I_tt = info[:k, :k]
    I_td = info[:k, k:]
    I_dd = info[k:, k:]

    # per-observation scores of the reduced likelihood, by central differences
    def marg(mu_x, sigma2_x):
        return _marginal_terms(dataset.w, DeltaParams(mu_x, sigma2_x), meas)

    h_mu = _GRAD_STEP * max(1.0, abs(delta.mu_x))
    h_s2 = _GRAD_STEP * max(1.0, abs(delta.sigma2_x))
    h_s2 = min(h_s2, 0.5 * delta.sigma2_x)  # keep the probe positive
    d_mu = (marg(delta.mu_x + h_mu, delta.sigma2_x)
            - marg(delta.mu_x - h_mu, delta.sigma2_x)) / (2.0 * h_mu)
    d_s2 = (marg(delta.mu_x, delta.sigma2_x + h_s2)
            - marg(delta.mu_x, delta.sigma2_x - h_s2)) / (2.0 * h_s2)
    scores = np.column_stack([d_mu, d_s2])
    S_dd = scores.T @ scores
    return I_tt, I_td, I_dd, S_dd


def combine_pseudo_covariance(I_tt, I_td, I_dd, S_dd) -> np.ndarray:
    """Assemble the two-step sandwich covariance from its blocks.

    The result is the inverse information of the interest block plus a
    positive semidefinite inflation that accounts for the estimated
    nuisance parameters; when the cross block is zero it reduces to the
    inverse information exactly.
    """
    I_tt_inv, _ = _cov_from_information(I_tt)
    if not np.any(I_td):
        return 0.5 * (I_tt_inv + I_tt_inv.T)
    I_dd_inv, _ = _cov_from_information(I_dd)
    A = I_tt_inv @ I_td @ I_dd_inv
    cov = I_tt_inv + A @ S_dd @ A.T
    return 0.5 * (cov + cov.T)


def fit_aml(
    dataset: Dataset,
    meas: MeasurementSpec,
    links: Links = None,
    rule: HermiteRule = None,
    varying_precision: bool = True,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> FitResult:
    """Joint maximization of the quadrature likelihood over (theta, delta).

    The latent variance is optimized on the log scale to keep it positive;
    the reported covariance is the inverse observed information re-computed
    in the original (theta, mu_x, sigma2_x) coordinates at the optimum.
    """
    links = links or Links()
    rule = rule or hermite_rule(50)
    k = dataset.Z.shape[1] + 1 + dataset.V.shape[1] + (1 if varying_precision else 0)
    p_a, p_g = dataset.Z.shape[1], dataset.V.shape[1]

    theta0 = fit_naive(dataset, links, varying_precision=varying_precision,
                       tol=tol, max_iter=max_iter).theta_hat
    try:
        delta0 = pseudo_nuisance(dataset, meas)
    except InfeasibleNuisanceError:
        # fall back once to a perturbed but feasible start
        s2w = float(np.var(dataset.w, ddof=0))
        delta0 = DeltaParams(
            mu_x=(float(np.mean(dataset.w)) - meas.tau0) / meas.tau1,
            sigma2_x=max(s2w / meas.tau1**2, 1e-2),
        )

    def obj(vec):
        th = ThetaParams.from_array(vec[:k], p_a, p_g, varying_precision)
        de = DeltaParams(mu_x=vec[k], sigma2_x=float(np.exp(np.clip(vec[k + 1], -700, 50))))
        return loglik_approx(dataset, th, de, meas, rule, links).value

    vec0 = np.concatenate(
        [theta0.to_array(), [delta0.mu_x, np.log(delta0.sigma2_x)]]
    )
    try:
        res = maximize(obj, vec0, tol=tol, max_iter=max_iter)
    except EvaluationError:
        vec0_alt = np.concatenate(
            [0.5 * theta0.to_array(), [delta0.mu_x, np.log(delta0.sigma2_x) + 0.5]]
        )
        res = maximize(obj, vec0_alt, tol=tol, max_iter=max_iter)

    theta_hat = ThetaParams.from_array(res.x[:k], p_a, p_g, varying_precision)
    delta_hat = DeltaParams(mu_x=float(res.x[k]), sigma2_x=float(np.exp(res.x[k + 1])))

    def joint_orig(vec):
        if vec[k + 1] <= 0.0:
            return -np.inf
        th = ThetaParams.from_array(vec[:k], p_a, p_g, varying_precision)
        de = DeltaParams(mu_x=vec[k], sigma2_x=vec[k + 1])
        return loglik_approx(dataset, th, de, meas, rule, links).value

    point = np.concatenate([theta_hat.to_array(), delta_hat.to_array()])
    info = -numerical_hessian(joint_orig, point)
    cov, ok = _cov_from_information(info)
    return FitResult(
        method="aml",
        theta_hat=theta_hat,
        delta_hat=delta_hat,
        covariance=cov,
        standard_errors=_standard_errors(cov),
        loglik=loglik_approx(dataset, theta_hat, delta_hat, meas, rule, links).value,
        converged=bool(res.converged and ok),
        param_names=theta_hat.names() + ["mu_x", "sigma2_x"],
        cov_method="observed_information",
        n_iterations=res.iterations,
    )
