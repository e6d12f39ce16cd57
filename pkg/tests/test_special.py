import math

import numpy as np
import pytest
import scipy.special

from lowrank_mdl.errors import DomainError
from lowrank_mdl.tools.special_tool import log2_binomial, log_beta, log_gamma, reg_inc_beta


@pytest.mark.parametrize("x", [0.05, 0.3, 0.5, 1.0, 1.5, 2.5, 10.0, 123.4, 1e4])
def test_log_gamma_matches_scipy(x):
    assert log_gamma(x) == pytest.approx(scipy.special.gammaln(x), rel=1e-12, abs=1e-12)


def test_log_gamma_vectorized():
    xs = np.linspace(0.1, 50.0, 37)
    np.testing.assert_allclose(log_gamma(xs), scipy.special.gammaln(xs), rtol=1e-12, atol=1e-12)


def test_log_gamma_domain():
    with pytest.raises(DomainError):
        log_gamma(0.0)
    with pytest.raises(DomainError):
        log_gamma(-1.5)


def test_log_beta_matches_scipy():
    assert log_beta(4.5, 0.5) == pytest.approx(scipy.special.betaln(4.5, 0.5), rel=1e-12)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5), (4.5, 0.5), (0.5, 24.5), (24.5, 0.5), (3.0, 7.0)])
def test_reg_inc_beta_matches_scipy(a, b):
    xs = np.linspace(0.0, 1.0, 101)
    np.testing.assert_allclose(reg_inc_beta(xs, a, b), scipy.special.betainc(a, b, xs), atol=1e-10)


def test_reg_inc_beta_broadcasts_parameters():
    xs = np.array([0.1, 0.5, 0.9])
    a = np.array([0.5, 2.0, 10.0])
    np.testing.assert_allclose(reg_inc_beta(xs, a, 0.5), scipy.special.betainc(a, 0.5, xs), atol=1e-10)


def test_reg_inc_beta_scalar_and_edges():
    assert isinstance(reg_inc_beta(0.3, 2.0, 3.0), float)
    assert reg_inc_beta(0.0, 2.0, 3.0) == 0.0
    assert reg_inc_beta(1.0, 2.0, 3.0) == 1.0


def test_reg_inc_beta_domain():
    with pytest.raises(DomainError):
        reg_inc_beta(1.5, 1.0, 1.0)
    with pytest.raises(DomainError):
        reg_inc_beta(0.5, 0.0, 1.0)


def test_log2_binomial_matches_exact_counts():
    for n in range(0, 61):
        for k in range(0, n + 1):
            assert log2_binomial(n, k) == pytest.approx(math.log2(math.comb(n, k)), abs=1e-9)


def test_log2_binomial_is_zero_at_the_ends():
    assert log2_binomial(1000, 0) == 0.0
    assert log2_binomial(1000, 1000) == 0.0


def test_log_gamma_satisfies_the_recurrence():
    xs = np.linspace(0.1, 50.0, 200)
    np.testing.assert_allclose(log_gamma(xs + 1.0) - log_gamma(xs), np.log(xs), atol=1e-10)


def test_reg_inc_beta_is_monotone_and_symmetric():
    xs = np.linspace(0.0, 1.0, 401)
    for a, b in [(0.5, 4.5), (2.0, 3.0), (0.5, 0.5), (12.0, 0.5)]:
        values = reg_inc_beta(xs, a, b)
        assert np.all(np.diff(values) >= -1e-12)
        np.testing.assert_allclose(values + reg_inc_beta(1.0 - xs, b, a), 1.0, atol=1e-10)


@pytest.mark.parametrize("a,b,xs", [
    (0.5, 5e4, np.array([1e-7, 1e-6, 1e-5, 4e-5, 1e-4])),
    (5e4, 0.5, np.array([0.9999, 0.99996, 0.99999, 0.999999])),
])
def test_reg_inc_beta_stays_accurate_for_large_parameters(a, b, xs):
    np.testing.assert_allclose(reg_inc_beta(xs, a, b), scipy.special.betainc(a, b, xs), atol=1e-9)
