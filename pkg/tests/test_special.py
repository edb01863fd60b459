import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from betaeiv import digamma, log_gamma, trigamma

mpmath.mp.dps = 40


def test_log_gamma_trivial_values():
    assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-14)
    assert log_gamma(2.0) == pytest.approx(0.0, abs=1e-14)


def test_log_gamma_half_is_log_sqrt_pi():
    # independent arbitrary-precision oracle: ln Gamma(1/2) = ln sqrt(pi)
    oracle = float(mpmath.log(mpmath.sqrt(mpmath.pi)))
    assert oracle == pytest.approx(0.5723649429, abs=1e-10)
    assert log_gamma(0.5) == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("z", np.logspace(-6, 6, 25).tolist())
def test_log_gamma_accuracy_against_mpmath(z):
    oracle = float(mpmath.loggamma(mpmath.mpf(z)))
    # 1e-12 absolute where representable; large outputs are ulp-limited
    assert log_gamma(z) == pytest.approx(oracle, abs=1e-12, rel=1e-13)


def test_digamma_known_values():
    euler = float(mpmath.euler)
    assert digamma(1.0) == pytest.approx(-euler, abs=1e-12)
    assert digamma(1.0) == pytest.approx(-0.5772156649, abs=1e-10)
    assert digamma(0.5) == pytest.approx(-euler - 2.0 * math.log(2.0), abs=1e-12)
    assert digamma(0.5) == pytest.approx(-1.9635100260, abs=1e-10)


@pytest.mark.parametrize("z", np.logspace(-6, 6, 25).tolist())
def test_digamma_accuracy_against_mpmath(z):
    oracle = float(mpmath.digamma(mpmath.mpf(z)))
    assert digamma(z) == pytest.approx(oracle, abs=1e-10, rel=1e-12)


def test_digamma_matches_log_gamma_finite_difference():
    z, h = 10.0, 1e-5
    fd = (log_gamma(z + h) - log_gamma(z - h)) / (2.0 * h)
    assert digamma(z) == pytest.approx(fd, abs=1e-6)


def test_trigamma_known_value_pi_squared_over_six():
    assert trigamma(1.0) == pytest.approx(math.pi**2 / 6.0, abs=1e-12)
    assert trigamma(1.0) == pytest.approx(1.6449340668, abs=1e-10)


def test_trigamma_matches_digamma_finite_difference():
    z, h = 7.0, 1e-5
    fd = (digamma(z + h) - digamma(z - h)) / (2.0 * h)
    assert trigamma(z) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("z", np.logspace(-6, 6, 25).tolist())
def test_trigamma_accuracy_and_positivity(z):
    oracle = float(mpmath.polygamma(1, mpmath.mpf(z)))
    assert trigamma(z) == pytest.approx(oracle, abs=1e-10, rel=1e-11)
    assert trigamma(z) > 0.0


@given(st.floats(min_value=0.1, max_value=100.0))
def test_digamma_recurrence(z):
    assert digamma(z + 1.0) - digamma(z) == pytest.approx(1.0 / z, abs=1e-9)


@given(st.floats(min_value=0.1, max_value=100.0))
def test_log_gamma_recurrence(z):
    assert log_gamma(z + 1.0) - log_gamma(z) == pytest.approx(math.log(z), abs=1e-10)


@given(st.floats(min_value=0.1, max_value=100.0))
def test_trigamma_recurrence(z):
    assert trigamma(z + 1.0) - trigamma(z) == pytest.approx(-1.0 / z**2, abs=1e-9)


@pytest.mark.parametrize("fn", [log_gamma, digamma, trigamma])
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_domain_errors(fn, bad):
    with pytest.raises(ValueError):
        fn(bad)


def test_vectorized_calls_match_scalar():
    z = np.array([0.5, 1.0, 3.25, 42.0])
    np.testing.assert_allclose(log_gamma(z), [log_gamma(v) for v in z], rtol=0)
    np.testing.assert_allclose(digamma(z), [digamma(v) for v in z], rtol=0)
    np.testing.assert_allclose(trigamma(z), [trigamma(v) for v in z], rtol=0)
