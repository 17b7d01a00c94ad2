"""Modified Bessel functions I0, I1 and the hypergeometric 0F1(;1;z).

Power series are used below ``_SERIES_MAX`` (all terms positive, so no
cancellation), the Hankel asymptotic series above it.  The exponentially
scaled variants ``exp(-x) I_n(x)`` never overflow and are what the steady
circle equations consume.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["bessel_i0", "bessel_i1", "bessel_i0e", "bessel_i1e", "hyp0f1_b1"]

_SERIES_MAX = 25.0
_RATIO_STOP = 1e-17
_MAX_TERMS = 500


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("argument must be finite")
    if np.any(x < 0):
        raise ValueError("argument must be >= 0")
    return x


def _series(x, order):
    """sum_k (x/2)^(2k+order) / (k! (k+order)!) by term recurrence."""
    q = 0.25 * x * x
    term = (0.5 * x) ** order / math.factorial(order)
    total = term.copy()
    for k in range(1, _MAX_TERMS):
        term = term * q / (k * (k + order))
        total = total + term
        if np.all(term <= _RATIO_STOP * total):
            break
    return total


def _asymptotic_scaled(x, order):
    """exp(-x) I_order(x) from the Hankel expansion, valid for large x."""
    mu = 4.0 * order * order
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 60):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        total = total + term
        if np.all(np.abs(term) <= _RATIO_STOP * np.abs(total)):
            break
    return total / np.sqrt(2.0 * np.pi * x)


def _scaled(x, order):
    x = _check_x(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= _SERIES_MAX
    if np.any(small):
        xs = x[small]
        out[small] = _series(xs, order) * np.exp(-xs)
    if np.any(~small):
        out[~small] = _asymptotic_scaled(x[~small], order)
    return out[0] if scalar else out


def bessel_i0e(x):
    """exp(-x) * I0(x) for x >= 0."""
    return _scaled(x, 0)


def bessel_i1e(x):
    """exp(-x) * I1(x) for x >= 0."""
    return _scaled(x, 1)


def _unscaled(x, order):
    x = _check_x(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= _SERIES_MAX
    if np.any(small):
        out[small] = _series(x[small], order)
    if np.any(~small):
        xl = x[~small]
        # exp(x) * scaled overflows only beyond x ~ 713, where inf is correct
        with np.errstate(over="ignore"):
            out[~small] = np.exp(xl) * _asymptotic_scaled(xl, order)
    return out[0] if scalar else out


def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero."""
    return _unscaled(x, 0)


def bessel_i1(x):
    """Modified Bessel function of the first kind, order one."""
    return _unscaled(x, 1)


def hyp0f1_b1(z):
    """Confluent limit function 0F1(;1;z) = sum_k z^k / (k!)^2, z >= 0.

    Evaluated by its own series, independently of the Bessel routines; the
    identity 0F1(;1;z) = I0(2 sqrt(z)) is a test oracle, not the method.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("argument must be finite")
    if np.any(z < 0):
        raise ValueError("argument must be >= 0")
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, _MAX_TERMS):
        term = term * z / (k * k)
        total = total + term
        if np.all(term <= _RATIO_STOP * total):
            break
    return total[0] if scalar else total
