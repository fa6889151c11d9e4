"""Regularized incomplete gamma function.

Series expansion below ``x < a + 1``, modified-Lentz continued fraction for
the upper tail otherwise.  ``math.lgamma`` supplies the log-gamma prefactor.
"""
import math

import numpy as np

from .errors import ParameterError

_EPS = 1e-16
_TINY = 1e-300


def _max_iter(a, x):
    # Both expansions need O(sqrt(a)) .. O(x) terms for large arguments.
    return 500 + int(10 * math.sqrt(a + x) + x)


def _series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_max_iter(a, x)):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_cf(a, x):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _max_iter(a, x)):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma fraction did not converge (a={a}, x={x})")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def _gammainc_scalar(a, x):
    if not a > 0:
        raise ParameterError(f"shape must be positive, got {a}")
    if x < 0:
        raise ParameterError(f"argument must be non-negative, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(_series(a, x), 1.0)
    return max(1.0 - _upper_cf(a, x), 0.0)


_gammainc_vec = np.vectorize(_gammainc_scalar, otypes=[float])


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma ``P(a, x) = gamma(a, x) / Gamma(a)``.

    Accepts scalars or arrays (broadcast); returns a float for scalar input.
    """
    if np.ndim(a) == 0 and np.ndim(x) == 0:
        return _gammainc_scalar(float(a), float(x))
    return _gammainc_vec(a, x)


def gamma_ratio(m, a):
    """``Gamma(m + a) / Gamma(m)`` via log-gamma."""
    return math.exp(math.lgamma(m + a) - math.lgamma(m))
