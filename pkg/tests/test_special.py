import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ewcef import special
from ewcef.errors import DomainError

EULER = 0.5772156649015329


def test_known_values():
    assert special.log_gamma(1.0) == 0.0
    assert abs(special.log_gamma(0.5) - 0.5 * math.log(math.pi)) < 1e-15
    assert abs(special.digamma(1.0) + EULER) < 1e-15
    assert abs(special.trigamma(1.0) - math.pi**2 / 6) < 1e-15
    assert abs(special.trigamma(0.5) - math.pi**2 / 2) < 1e-14
    assert abs(special.bessel_i(0, 0.0) - 1.0) == 0.0
    assert special.bessel_i(1, 0.0) == 0.0


def _trigamma_series(x, terms=200000):
    # direct sum of 1/(x+i)^2 with an integral tail correction
    i = np.arange(terms)
    n = x + terms
    return np.sum(1.0 / (x + i) ** 2) + 1 / n + 1 / (2 * n * n)


@pytest.mark.parametrize("x", [1e-3, 0.3, 1.7, 5.0, 42.0])
def test_trigamma_against_series(x):
    assert special.trigamma(x) == pytest.approx(_trigamma_series(x), rel=1e-10)


def test_trigamma_large_batch_path_matches_small_batch():
    x = np.logspace(-6, 6, 2000)
    big = special.trigamma(x)
    small = np.array([special.trigamma(v) for v in x[::50]])
    assert np.max(np.abs(big[::50] / small - 1)) < 1e-13


@given(st.floats(1e-4, 1e4))
def test_recurrences(x):
    assert special.log_gamma(x + 1) - special.log_gamma(x) == pytest.approx(math.log(x), abs=1e-10 * (1 + abs(math.log(x))))
    assert special.digamma(x + 1) - special.digamma(x) == pytest.approx(1 / x, rel=1e-9)
    assert special.trigamma(x) - special.trigamma(x + 1) == pytest.approx(1 / x**2, rel=1e-9)


@given(st.floats(0.05, 200.0))
def test_derivative_chain(x):
    h = 1e-5 * x
    fd = (special.log_gamma(x + h) - special.log_gamma(x - h)) / (2 * h)
    assert fd == pytest.approx(special.digamma(x), rel=1e-6, abs=1e-6)
    fd2 = (special.digamma(x + h) - special.digamma(x - h)) / (2 * h)
    assert fd2 == pytest.approx(special.trigamma(x), rel=1e-6)


@given(st.lists(st.floats(0.01, 50.0), min_size=2, max_size=6), st.randoms())
def test_log_beta_permutation_symmetric(a, r):
    b = list(a)
    r.shuffle(b)
    assert special.log_beta(np.array(a)) == special.log_beta(np.array(b))


def test_log_beta_two_arguments():
    assert special.log_beta(np.array([2.0, 3.0])) == pytest.approx(math.log(1 / 12), rel=1e-14)


@given(st.floats(1e-6, 700.0))
def test_bessel_ratio_bounds(x):
    r = special.bessel_ratio(x)
    assert 0 < r < 1
    assert r == pytest.approx(special.bessel_i(1, x) / special.bessel_i(0, x), rel=1e-12)


def test_bessel_ratio_limits():
    assert special.bessel_ratio(1e-8) == pytest.approx(0.5e-8, rel=1e-8)
    # large-argument expansion 1 - 1/(2x) - 1/(8x^2)
    x = 1e6
    assert special.bessel_ratio(x) == pytest.approx(1 - 0.5 / x - 0.125 / x**2, rel=1e-14)
    assert special.bessel_ratio(1e10) <= 1.0


def test_domain_errors():
    for f in (special.log_gamma, special.digamma, special.trigamma):
        with pytest.raises(DomainError):
            f(0.0)
        with pytest.raises(DomainError):
            f(-1.0)
    with pytest.raises(DomainError):
        special.log_beta(np.array([1.0]))
    with pytest.raises(OverflowError):
        special.bessel_i(0, 1000.0)
