import math

import mpmath
import numpy as np
import pytest

import betaeiv as b
from betaeiv.exceptions import CalibrationInfeasibleError, InfeasibleNuisanceError
from conftest import simulate_general

LINKS = b.Links()
mpmath.mp.dps = 30


def _normal_quantile_oracle(p):
    # inverse CDF through the arbitrary-precision error function inverse
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def test_wald_interval_basic():
    lo, hi = b.wald_interval(2.0, 0.1, 0.95)
    assert lo == pytest.approx(1.8040004, abs=1e-4)
    assert hi == pytest.approx(2.1959996, abs=1e-4)
    z = (hi - 2.0) / 0.1
    assert z == pytest.approx(1.959964, abs=1e-5)
    assert z == pytest.approx(_normal_quantile_oracle(0.975), abs=1e-9)


def test_wald_interval_degenerate_and_half_level():
    assert b.wald_interval(1.3, 0.0, 0.9) == (1.3, 1.3)
    lo, hi = b.wald_interval(0.0, 1.0, 0.5)
    assert hi == pytest.approx(0.674490, abs=1e-6)
    assert hi == pytest.approx(_normal_quantile_oracle(0.75), abs=1e-9)
    assert lo == -hi


def test_wald_interval_rejects_bad_inputs():
    with pytest.raises(ValueError):
        b.wald_interval(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        b.wald_interval(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        b.wald_interval(0.0, -0.1, 0.9)


def _study_setup(kx, seed, n, varying=False):
    theta = (
        b.ThetaParams(alpha=[2.0], beta=-0.6, gamma=[4.0], lam=0.5)
        if varying
        else b.ThetaParams(alpha=[2.0], beta=-0.6, gamma=[2.5], lam=None)
    )
    delta = b.DeltaParams(2.5, 2.7)
    meas = (
        b.MeasurementSpec(0.0, 1.0, 0.0)
        if kx >= 1.0
        else b.measurement_from_reliability(0.0, 1.0, kx, 2.7)
    )
    ds, x = simulate_general(seed, n, theta, delta, meas)
    return ds, x, theta, delta, meas


def test_error_free_methods_collapse_pairwise():
    for seed in (1, 2):
        ds, x, theta, delta, meas0 = _study_setup(1.0, seed, 200)
        fits = [
            b.fit_naive(ds, varying_precision=False),
            b.fit_aml(ds, meas0, varying_precision=False),
            b.fit_mpl(ds, meas0, varying_precision=False),
            b.fit_rc(ds, meas0, n_boot=0, varying_precision=False),
        ]
        vecs = [f.theta_hat.to_array() for f in fits]
        for i in range(len(vecs)):
            for j in range(i + 1, len(vecs)):
                np.testing.assert_allclose(vecs[i], vecs[j], atol=1e-4)


def test_naive_fit_invariant_to_observation_order():
    ds, *_ = _study_setup(0.75, 5, 80)
    perm = np.random.default_rng(0).permutation(ds.n)
    ds_perm = b.Dataset(y=ds.y[perm], Z=ds.Z[perm], V=ds.V[perm], w=ds.w[perm])
    f1 = b.fit_naive(ds, varying_precision=False)
    f2 = b.fit_naive(ds_perm, varying_precision=False)
    np.testing.assert_allclose(
        f1.theta_hat.to_array(), f2.theta_hat.to_array(), atol=1e-8
    )


def test_recentering_equivariance_for_measurement_aware_fits():
    ds, _, theta, delta, meas = _study_setup(0.75, 6, 120)
    c = 3.7
    ds_shift = b.Dataset(y=ds.y, Z=ds.Z, V=ds.V, w=ds.w + c)
    meas_shift = b.MeasurementSpec(meas.tau0 + c, meas.tau1, meas.sigma2_e)
    for fit_fn in (
        lambda d, m: b.fit_aml(d, m, varying_precision=False),
        lambda d, m: b.fit_mpl(d, m, varying_precision=False),
        lambda d, m: b.fit_rc(d, m, n_boot=0, varying_precision=False),
    ):
        base = fit_fn(ds, meas).theta_hat.to_array()
        shifted = fit_fn(ds_shift, meas_shift).theta_hat.to_array()
        np.testing.assert_allclose(base, shifted, atol=1e-6)


def test_recentering_shifts_only_the_naive_intercepts():
    # the naive fit ignores the measurement spec, so recentering the
    # surrogate moves its intercepts by exactly -coef*c and nothing else
    ds, *_ = _study_setup(0.75, 16, 150, varying=True)
    c = 2.0
    ds_shift = b.Dataset(y=ds.y, Z=ds.Z, V=ds.V, w=ds.w + c)
    f1 = b.fit_naive(ds)
    f2 = b.fit_naive(ds_shift)
    assert f2.theta_hat.alpha[0] == pytest.approx(
        f1.theta_hat.alpha[0] - c * f1.theta_hat.beta, abs=1e-4
    )
    assert f2.theta_hat.beta == pytest.approx(f1.theta_hat.beta, abs=1e-4)
    assert f2.theta_hat.gamma[0] == pytest.approx(
        f1.theta_hat.gamma[0] - c * f1.theta_hat.lam, abs=1e-4
    )
    assert f2.theta_hat.lam == pytest.approx(f1.theta_hat.lam, abs=1e-4)


def test_closed_form_nuisance_maximizes_reduced_likelihood():
    ds, _, theta, delta, meas = _study_setup(0.75, 7, 60)
    closed = b.pseudo_nuisance(ds, meas)

    def reduced(vec):
        return b.loglik_w_marginal(
            ds, b.DeltaParams(vec[0], math.exp(vec[1])), meas
        ).value

    res = b.maximize(
        reduced,
        np.array([closed.mu_x + 0.5, math.log(closed.sigma2_x) + 0.3]),
        tol=1e-9,
        max_iter=800,
    )
    assert res.converged
    assert res.x[0] == pytest.approx(closed.mu_x, abs=1e-8)
    assert math.exp(res.x[1]) == pytest.approx(closed.sigma2_x, abs=1e-8)


def test_rc_nuisance_uses_unbiased_variance_divisor():
    ds, _, theta, delta, meas = _study_setup(0.75, 8, 50)
    rc = b.rc_nuisance(ds, meas)
    mpl = b.pseudo_nuisance(ds, meas)
    s2_nm1 = float(np.var(ds.w, ddof=1))
    s2_n = float(np.var(ds.w, ddof=0))
    assert rc.sigma2_x == pytest.approx(s2_nm1 - meas.sigma2_e, rel=1e-12)
    assert mpl.sigma2_x == pytest.approx(s2_n - meas.sigma2_e, rel=1e-12)
    assert rc.mu_x == mpl.mu_x


def test_reported_loglik_matches_likelihood_module():
    ds, _, theta, delta, meas = _study_setup(0.75, 9, 80)
    rule = b.hermite_rule(50)

    fit_n = b.fit_naive(ds, varying_precision=False)
    assert fit_n.loglik == pytest.approx(
        b.loglik_naive(ds, fit_n.theta_hat, LINKS).value, abs=1e-10
    )

    fit_rc = b.fit_rc(ds, meas, n_boot=0, varying_precision=False)
    x_tilde, _ = b.conditional_moments(ds.w, fit_rc.delta_hat, meas)
    assert fit_rc.loglik == pytest.approx(
        b.loglik_calibration(ds, fit_rc.theta_hat, x_tilde, LINKS).value, abs=1e-10
    )

    fit_m = b.fit_mpl(ds, meas, varying_precision=False)
    assert fit_m.loglik == pytest.approx(
        b.loglik_pseudo(ds, fit_m.theta_hat, fit_m.delta_hat, meas, rule, LINKS).value,
        abs=1e-10,
    )

    fit_a = b.fit_aml(ds, meas, varying_precision=False)
    assert fit_a.loglik == pytest.approx(
        b.loglik_approx(ds, fit_a.theta_hat, fit_a.delta_hat, meas, rule, LINKS).value,
        abs=1e-10,
    )


def test_standard_errors_are_covariance_diagonal_roots():
    ds, _, theta, delta, meas = _study_setup(0.75, 10, 80)
    for fit in (
        b.fit_naive(ds, varying_precision=False),
        b.fit_aml(ds, meas, varying_precision=False),
        b.fit_mpl(ds, meas, varying_precision=False),
    ):
        np.testing.assert_allclose(
            fit.standard_errors,
            np.sqrt(np.maximum(np.diag(fit.covariance), 0.0)),
            rtol=0,
        )
        np.testing.assert_allclose(fit.covariance, fit.covariance.T, atol=1e-8)
        assert np.all(fit.standard_errors >= 0.0)


def test_rc_with_zero_error_variance_equals_naive():
    ds, *_ = _study_setup(1.0, 11, 100)
    meas0 = b.MeasurementSpec(0.0, 1.0, 0.0)
    f_rc = b.fit_rc(ds, meas0, n_boot=0, varying_precision=False)
    f_nv = b.fit_naive(ds, varying_precision=False)
    np.testing.assert_allclose(
        f_rc.theta_hat.to_array(), f_nv.theta_hat.to_array(), atol=1e-5
    )


def test_rc_bootstrap_changes_uncertainty_not_estimates():
    ds, _, theta, delta, meas = _study_setup(0.75, 12, 60)
    f0 = b.fit_rc(ds, meas, n_boot=0, varying_precision=False)
    f1 = b.fit_rc(ds, meas, n_boot=30, seed=5, varying_precision=False)
    np.testing.assert_array_equal(f0.theta_hat.to_array(), f1.theta_hat.to_array())
    assert f0.cov_method == "observed_information"
    assert f1.cov_method == "parametric_bootstrap"
    assert f1.n_boot == 30
    # same seed reproduces the bootstrap exactly
    f2 = b.fit_rc(ds, meas, n_boot=30, seed=5, varying_precision=False)
    np.testing.assert_array_equal(f1.standard_errors, f2.standard_errors)


def test_rc_infeasible_when_error_variance_exceeds_surrogate_spread():
    ds, *_ = _study_setup(0.75, 13, 40)
    huge = float(np.var(ds.w, ddof=1)) + 1.0
    with pytest.raises(CalibrationInfeasibleError) as err:
        b.fit_rc(ds, b.MeasurementSpec(0.0, 1.0, huge), n_boot=0)
    msg = str(err.value)
    assert "s2_w" in msg and "sigma2_e" in msg


def test_mpl_infeasible_nuisance_error():
    ds, *_ = _study_setup(0.75, 14, 40)
    huge = float(np.var(ds.w, ddof=0)) + 0.5
    with pytest.raises(InfeasibleNuisanceError):
        b.fit_mpl(ds, b.MeasurementSpec(0.0, 1.0, huge))


def test_sandwich_collapses_without_cross_information():
    ds, _, theta, delta, meas = _study_setup(0.75, 15, 80)
    fit = b.fit_mpl(ds, meas, varying_precision=False)
    I_tt, I_td, I_dd, S_dd = b.pseudo_covariance_blocks(
        ds, fit.theta_hat, fit.delta_hat, meas, b.hermite_rule(50), LINKS
    )
    collapsed = b.combine_pseudo_covariance(I_tt, np.zeros_like(I_td), I_dd, S_dd)
    np.testing.assert_allclose(collapsed, np.linalg.inv(I_tt), atol=1e-10)
    full = b.combine_pseudo_covariance(I_tt, I_td, I_dd, S_dd)
    correction = full - np.linalg.inv(I_tt)
    correction = 0.5 * (correction + correction.T)
    assert np.min(np.linalg.eigvalsh(correction)) >= -1e-8


def test_aml_and_mpl_agree_within_a_standard_error():
    ds, _, theta, delta, meas = _study_setup(0.95, 17, 150)
    fa = b.fit_aml(ds, meas, varying_precision=False)
    fm = b.fit_mpl(ds, meas, varying_precision=False)
    diff = np.abs(fa.theta_hat.to_array() - fm.theta_hat.to_array())
    joint_se = np.sqrt(
        fa.theta_standard_errors() ** 2 + fm.theta_standard_errors() ** 2
    )
    assert np.all(diff <= joint_se)


def test_two_sided_p_value():
    from betaeiv.estimators import two_sided_p_value

    assert two_sided_p_value(0.0) == pytest.approx(1.0)
    assert two_sided_p_value(1.959964) == pytest.approx(0.05, abs=1e-6)
    assert two_sided_p_value(-1.959964) == pytest.approx(0.05, abs=1e-6)
