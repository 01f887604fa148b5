"""Scalar special functions used by the exponential family frames.

All functions accept scalars or arrays and evaluate elementwise. Most are
domain-checked wrappers over :mod:`scipy.special`. ``trigamma`` uses the Hurwitz
zeta function for small batches and, for large ones, upward recurrence plus
the asymptotic series, which is several times faster on the long batches of
the Dirichlet link inversion. ``bessel_ratio`` works on the exponentially scaled
Bessel functions so it never overflows.
"""
import numpy as np
from scipy import special as sc

from .errors import DomainError

__all__ = [
    "log_gamma",
    "digamma",
    "trigamma",
    "log_beta",
    "bessel_i",
    "bessel_i_scaled",
    "bessel_ratio",
]


def _positive(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError(f"{name} requires finite x > 0")
    return x


def _out(value):
    return value[()] if isinstance(value, np.ndarray) and value.ndim == 0 else value


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    return _out(sc.gammaln(_positive(x, "log_gamma")))


def digamma(x):
    """d/dx ln Gamma(x) for x > 0."""
    return _out(sc.psi(_positive(x, "digamma")))


# Bernoulli-number coefficients B_2k of the trigamma asymptotic series
_TRIGAMMA_SERIES = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)
_SHIFT = 6
_SMALL = 256


def trigamma(x):
    """d^2/dx^2 ln Gamma(x) for x > 0.

    Every argument is shifted by six with ``trigamma(x) = trigamma(x + 1) +
    1/x^2``, then the asymptotic series is summed (relative error near 1e-14).
    """
    return _out(trigamma_unchecked(_positive(x, "trigamma")))


def trigamma_unchecked(x):
    """:func:`trigamma` without the domain check, for callers that already know x > 0."""
    if np.size(x) < _SMALL:
        # the series costs a few dozen array operations; a single ufunc wins here
        return sc.zeta(2.0, x)
    acc = 1.0 / (x * x)
    for i in range(1, _SHIFT):
        xi = x + i
        acc = acc + 1.0 / (xi * xi)
    x = x + _SHIFT
    z = 1.0 / (x * x)
    tail = 0.0
    for coef in reversed(_TRIGAMMA_SERIES):
        tail = z * (coef + tail)
    return acc + (1.0 + 0.5 / x + tail) / x


def log_beta(a):
    """Log of the multivariate beta function over the last axis of ``a``.

    ``sum(log_gamma(a_i)) - log_gamma(sum(a_i))``; requires at least two
    strictly positive components.
    """
    a = _positive(a, "log_beta")
    if a.ndim == 0 or a.shape[-1] < 2:
        raise DomainError("log_beta needs a vector of length >= 2")
    # sort so the result does not depend on argument order
    a = np.sort(a, axis=-1)
    return _out(np.sum(sc.gammaln(a), axis=-1) - sc.gammaln(np.sum(a, axis=-1)))


def _order_and_arg(order, x):
    if order not in (0, 1):
        raise DomainError("only orders 0 and 1 are supported")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise DomainError("bessel_i requires finite x >= 0")
    return x


def bessel_i_scaled(order, x):
    """exp(-x) * I_order(x) for order in {0, 1} and x >= 0."""
    x = _order_and_arg(order, x)
    return _out(sc.i0e(x) if order == 0 else sc.i1e(x))


def bessel_i(order, x):
    """Modified Bessel function of the first kind, I_0 or I_1.

    Raises OverflowError when the unscaled value is not representable.
    """
    x = _order_and_arg(order, x)
    with np.errstate(over="ignore"):
        value = sc.i0(x) if order == 0 else sc.i1(x)
    if np.any(np.isinf(value)):
        raise OverflowError("I_%d(x) overflows; use bessel_i_scaled" % order)
    return _out(value)


def bessel_ratio(x):
    """I_1(x) / I_0(x), computed from the scaled functions."""
    x = _order_and_arg(0, x)
    return _out(sc.i1e(x) / sc.i0e(x))
