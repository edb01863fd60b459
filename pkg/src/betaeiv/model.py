"""Domain types for beta regression with a mismeasured covariate.

The response y_t in (0,1) follows a beta law with mean mu_t and precision
phi_t. Both submodels are linear on a link scale and share a single latent
covariate x_t, observed only through the surrogate w_t = tau0 + tau1*x_t + e_t
with x_t ~ N(mu_x, sigma2_x) and e_t ~ N(0, sigma2_e) independent.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special as _sp

from .exceptions import DegenerateModelError

# distance kept from the response/mean boundaries to avoid log(0) in the
# beta kernel; a numerical guard, not a model feature
BOUNDARY_CLAMP = 1e-12

# cap on the precision linear predictor so exp() stays within the range
# where the gamma-function terms of the kernel remain finite
_PHI_ETA_MAX = 30.0
_PHI_ETA_MIN = -30.0


def _logistic(eta):
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class LinkFunction:
    """A strictly increasing, twice differentiable link with its inverse.

    ``inverse`` clamps its output away from the domain boundary so that
    downstream likelihood evaluations never hit log(0).
    """

    name: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]


def _logit_link():
    return LinkFunction(
        name="logit",
        forward=lambda mu: np.log(mu) - np.log1p(-np.asarray(mu, dtype=float)),
        inverse=lambda eta: np.clip(
            _logistic(eta), BOUNDARY_CLAMP, 1.0 - BOUNDARY_CLAMP
        ),
        deriv=lambda mu: 1.0 / (np.asarray(mu) * (1.0 - np.asarray(mu))),
    )


def _probit_link():
    return LinkFunction(
        name="probit",
        forward=lambda mu: _sp.ndtri(np.asarray(mu, dtype=float)),
        inverse=lambda eta: np.clip(
            _sp.ndtr(np.asarray(eta, dtype=float)),
            BOUNDARY_CLAMP,
            1.0 - BOUNDARY_CLAMP,
        ),
        deriv=lambda mu: np.sqrt(2.0 * np.pi)
        * np.exp(0.5 * _sp.ndtri(np.asarray(mu, dtype=float)) ** 2),
    )


def _cloglog_link():
    return LinkFunction(
        name="cloglog",
        forward=lambda mu: np.log(-np.log1p(-np.asarray(mu, dtype=float))),
        inverse=lambda eta: np.clip(
            -np.expm1(-np.exp(np.clip(np.asarray(eta, dtype=float), -700, 700))),
            BOUNDARY_CLAMP,
            1.0 - BOUNDARY_CLAMP,
        ),
        deriv=lambda mu: -1.0
        / ((1.0 - np.asarray(mu)) * np.log1p(-np.asarray(mu))),
    )


def _log_link():
    return LinkFunction(
        name="log",
        forward=lambda phi: np.log(np.asarray(phi, dtype=float)),
        inverse=lambda eta: np.exp(
            np.clip(np.asarray(eta, dtype=float), _PHI_ETA_MIN, _PHI_ETA_MAX)
        ),
        deriv=lambda phi: 1.0 / np.asarray(phi),
    )


_MEAN_LINKS = {"logit": _logit_link, "probit": _probit_link, "cloglog": _cloglog_link}
_PRECISION_LINKS = {"log": _log_link}


def mean_link(name: str) -> LinkFunction:
    try:
        return _MEAN_LINKS[name]()
    except KeyError:
        raise ValueError(f"unknown mean link {name!r}; choose from {sorted(_MEAN_LINKS)}")


def precision_link(name: str) -> LinkFunction:
    try:
        return _PRECISION_LINKS[name]()
    except KeyError:
        raise ValueError(
            f"unknown precision link {name!r}; choose from {sorted(_PRECISION_LINKS)}"
        )


@dataclass(frozen=True)
class Links:
    """The pair of links used by both submodels (defaults: logit and log)."""

    mean: LinkFunction = field(default_factory=_logit_link)
    precision: LinkFunction = field(default_factory=_log_link)


def make_links(mean: str = "logit", precision: str = "log") -> Links:
    return Links(mean=mean_link(mean), precision=precision_link(precision))


def _freeze(arr):
    arr = np.ascontiguousarray(np.asarray(arr, dtype=float))
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Observed data: responses, error-free designs, and the surrogate.

    Parameters
    ----------
    y : (n,) array
        Responses, strictly inside (0, 1).
    Z : (n, p_alpha) array
        Error-free covariates of the mean submodel (first column typically
        an intercept).
    V : (n, p_gamma) array
        Error-free covariates of the precision submodel.
    w : (n,) array
        Surrogate observations of the latent covariate.
    """

    y: np.ndarray
    Z: np.ndarray
    V: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        y = _freeze(self.y)
        Z = _freeze(np.atleast_2d(self.Z))
        V = _freeze(np.atleast_2d(self.V))
        w = _freeze(self.w)
        n = y.shape[0]
        if y.ndim != 1 or w.ndim != 1 or w.shape[0] != n:
            raise ValueError("y and w must be 1-d arrays of equal length")
        if Z.shape[0] != n or V.shape[0] != n:
            raise ValueError("Z and V must have one row per observation")
        for name, arr in (("y", y), ("Z", Z), ("V", V), ("w", w)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(y <= 0.0) or np.any(y >= 1.0):
            raise ValueError("responses must lie strictly inside (0, 1)")
        if n <= Z.shape[1] + V.shape[1] + 2:
            raise ValueError(
                "too few observations for the parameter count: need "
                f"n > {Z.shape[1] + V.shape[1] + 2}, got n = {n}"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class MeasurementSpec:
    """The known measurement mechanism (tau0, tau1, sigma2_e).

    tau0 and tau1 are the additive and multiplicative biases of the
    surrogate equation; sigma2_e is the error variance. Use
    :func:`measurement_from_reliability` to construct the spec from a
    reliability ratio instead of an error variance.
    """

    tau0: float = 0.0
    tau1: float = 1.0
    sigma2_e: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.tau0) or not np.isfinite(self.tau1):
            raise ValueError("tau0 and tau1 must be finite")
        if self.tau1 == 0.0:
            raise ValueError("tau1 must be nonzero")
        if not np.isfinite(self.sigma2_e) or self.sigma2_e < 0.0:
            raise ValueError("sigma2_e must be nonnegative")


def measurement_from_reliability(tau0, tau1, kx, sigma2_x) -> MeasurementSpec:
    """Convert a reliability ratio into an explicit error variance.

    The reliability ratio kx = tau1*sigma2_x / (tau1^2*sigma2_x + sigma2_e)
    determines sigma2_e = tau1*sigma2_x*(1 - tau1*kx)/kx once sigma2_x is
    fixed. Pass the true sigma2_x when simulating and a nuisance estimate
    when fitting.
    """
    if not 0.0 < kx <= 1.0:
        raise ValueError("reliability ratio must lie in (0, 1]")
    if sigma2_x <= 0.0:
        raise ValueError("sigma2_x must be positive")
    sigma2_e = tau1 * sigma2_x * (1.0 - tau1 * kx) / kx
    if sigma2_e < 0.0:
        raise ValueError(
            f"kx={kx} with tau1={tau1} implies a negative error variance"
        )
    return MeasurementSpec(tau0=tau0, tau1=tau1, sigma2_e=sigma2_e)


@dataclass(frozen=True)
class ThetaParams:
    """Interest parameters: mean coefficients (alpha, beta) and precision
    coefficients (gamma, lam).

    ``lam`` is the precision-submodel coefficient on the latent covariate;
    ``None`` means the fitted model excludes that term (constant-precision
    style designs).
    """

    alpha: np.ndarray
    beta: float
    gamma: np.ndarray
    lam: Optional[float] = None

    def __post_init__(self):
        alpha = _freeze(np.atleast_1d(self.alpha))
        gamma = _freeze(np.atleast_1d(self.gamma))
        if not np.all(np.isfinite(alpha)) or not np.all(np.isfinite(gamma)):
            raise ValueError("coefficients must be finite")
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if self.lam is not None and not np.isfinite(self.lam):
            raise ValueError("lam must be finite or None")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(
            self, "lam", None if self.lam is None else float(self.lam)
        )

    @property
    def p_alpha(self) -> int:
        return self.alpha.shape[0]

    @property
    def p_gamma(self) -> int:
        return self.gamma.shape[0]

    @property
    def has_lam(self) -> bool:
        return self.lam is not None

    @property
    def n_params(self) -> int:
        return self.p_alpha + 1 + self.p_gamma + (1 if self.has_lam else 0)

    def names(self) -> list:
        out = [f"alpha_{j}" for j in range(self.p_alpha)]
        out.append("beta")
        out += [f"gamma_{j}" for j in range(self.p_gamma)]
        if self.has_lam:
            out.append("lambda")
        return out

    def to_array(self) -> np.ndarray:
        parts = [self.alpha, [self.beta], self.gamma]
        if self.has_lam:
            parts.append([self.lam])
        return np.concatenate([np.atleast_1d(p) for p in parts]).astype(float)

    @classmethod
    def from_array(cls, vec, p_alpha: int, p_gamma: int, has_lam: bool):
        vec = np.asarray(vec, dtype=float)
        expected = p_alpha + 1 + p_gamma + (1 if has_lam else 0)
        if vec.shape != (expected,):
            raise ValueError(f"expected a vector of length {expected}")
        alpha = vec[:p_alpha]
        beta = vec[p_alpha]
        gamma = vec[p_alpha + 1 : p_alpha + 1 + p_gamma]
        lam = vec[-1] if has_lam else None
        return cls(alpha=alpha, beta=beta, gamma=gamma, lam=lam)


@dataclass(frozen=True)
class DeltaParams:
    """Nuisance parameters of the latent covariate: mean and variance."""

    mu_x: float
    sigma2_x: float

    def __post_init__(self):
        if not np.isfinite(self.mu_x):
            raise ValueError("mu_x must be finite")
        if not np.isfinite(self.sigma2_x) or self.sigma2_x <= 0.0:
            raise ValueError("sigma2_x must be positive")

    def to_array(self) -> np.ndarray:
        return np.array([self.mu_x, self.sigma2_x], dtype=float)


def mu_t(theta: ThetaParams, z, x, link: LinkFunction) -> np.ndarray:
    """Mean response at covariates ``z`` (row or matrix) and latent value(s) ``x``.

    Broadcasts: with z of shape (n, p) and x of shape (n,) or (n, Q) the
    linear predictor is z@alpha (+ broadcast) + beta*x.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    base = z @ theta.alpha if z.ndim > 1 else float(np.dot(z, theta.alpha))
    if np.ndim(base) == 1 and x.ndim == 2:
        eta = np.asarray(base)[:, None] + theta.beta * x
    else:
        eta = base + theta.beta * x
    return link.inverse(eta)


def phi_t(theta: ThetaParams, v, x, link: LinkFunction) -> np.ndarray:
    """Precision response at covariates ``v`` and latent value(s) ``x``."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    base = v @ theta.gamma if v.ndim > 1 else float(np.dot(v, theta.gamma))
    lam = theta.lam
    if lam is None:
        eta = base if x.ndim < 2 else np.broadcast_to(
            np.asarray(base)[:, None], (np.shape(base)[0], x.shape[1])
        )
    elif np.ndim(base) == 1 and x.ndim == 2:
        eta = np.asarray(base)[:, None] + lam * x
    else:
        eta = base + lam * x
    return link.inverse(eta)


def conditional_moments(w, delta: DeltaParams, meas: MeasurementSpec):
    """Mean and variance of the latent covariate given the surrogate.

    Returns ``(mu_xw, var_xw)`` where ``mu_xw`` matches the shape of ``w``
    and ``var_xw`` is a scalar (it does not depend on w). With zero error
    variance the calibration is exact: the mean is (w - tau0)/tau1 and the
    variance is exactly zero.
    """
    w = np.asarray(w, dtype=float)
    denom = meas.tau1**2 * delta.sigma2_x + meas.sigma2_e
    if denom <= 0.0:
        raise DegenerateModelError(
            "tau1^2*sigma2_x + sigma2_e must be positive; the surrogate "
            "distribution is degenerate"
        )
    if meas.sigma2_e == 0.0:
        mu = (w - meas.tau0) / meas.tau1
        return (mu, 0.0)
    kx = meas.tau1 * delta.sigma2_x / denom
    mu = delta.mu_x + kx * (w - (meas.tau0 + meas.tau1 * delta.mu_x))
    var = meas.sigma2_e * kx / meas.tau1
    return (mu, float(var))


def reliability_ratio(delta: DeltaParams, meas: MeasurementSpec) -> float:
    """kx = tau1*sigma2_x / (tau1^2*sigma2_x + sigma2_e)."""
    denom = meas.tau1**2 * delta.sigma2_x + meas.sigma2_e
    if denom <= 0.0:
        raise DegenerateModelError("degenerate surrogate distribution")
    return meas.tau1 * delta.sigma2_x / denom
