"""Log-gamma, digamma and trigamma on the positive half-line.

Thin validating wrappers around the scipy.special implementations. Inputs
below 1e-6 are accepted but carry no accuracy guarantee.
"""

import numpy as np
from scipy import special as _sp


def _validate_positive(z, name):
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} requires finite input")
    if np.any(arr <= 0.0):
        raise ValueError(f"{name} is defined for positive arguments only")
    return arr


def log_gamma(z):
    """Natural log of the gamma function, ln Gamma(z), for z > 0."""
    arr = _validate_positive(z, "log_gamma")
    out = _sp.gammaln(arr)
    return float(out) if np.isscalar(z) else out


def digamma(z):
    """First derivative of ln Gamma, psi(z), for z > 0."""
    arr = _validate_positive(z, "digamma")
    out = _sp.digamma(arr)
    return float(out) if np.isscalar(z) else out


def trigamma(z):
    """Second derivative of ln Gamma, psi'(z), for z > 0. Always positive."""
    arr = _validate_positive(z, "trigamma")
    out = _sp.polygamma(1, arr)
    return float(out) if np.isscalar(z) else out
