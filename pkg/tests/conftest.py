import numpy as np
import pytest

import betaeiv as b


def simulate_general(seed, n, theta, delta, meas, links=None, z_extra=0, v_extra=0):
    """Draw a dataset from the structural model, optionally with extra
    error-free covariate columns beyond the intercept."""
    links = links or b.Links()
    rng = np.random.default_rng(seed)
    Z = np.column_stack([np.ones(n)] + [rng.normal(size=n) for _ in range(z_extra)])
    V = np.column_stack([np.ones(n)] + [rng.normal(size=n) for _ in range(v_extra)])
    x = delta.mu_x + np.sqrt(delta.sigma2_x) * rng.standard_normal(n)
    e = np.sqrt(meas.sigma2_e) * rng.standard_normal(n) if meas.sigma2_e > 0 else np.zeros(n)
    w = meas.tau0 + meas.tau1 * x + e
    mu = links.mean.inverse(Z @ theta.alpha + theta.beta * x)
    eta_phi = V @ theta.gamma + (theta.lam * x if theta.has_lam else 0.0)
    phi = links.precision.inverse(eta_phi)
    y = np.clip(rng.beta(mu * phi, (1.0 - mu) * phi), 1e-12, 1.0 - 1e-12)
    return b.Dataset(y=y, Z=Z, V=V, w=w), x


@pytest.fixture
def study_theta_constant():
    return b.ThetaParams(alpha=[2.0], beta=-0.6, gamma=[2.5], lam=None)


@pytest.fixture
def study_theta_varying():
    return b.ThetaParams(alpha=[2.0], beta=-0.6, gamma=[4.0], lam=0.5)


@pytest.fixture
def study_delta():
    return b.DeltaParams(mu_x=2.5, sigma2_x=2.7)
