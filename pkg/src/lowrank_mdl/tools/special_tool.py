"""Special functions needed by the spherical-cap and enumerative coders.

``log_gamma`` and ``log_beta`` wrap ``scipy.special``; ``reg_inc_beta``
evaluates the continued fraction of the regularized incomplete Beta function
by the modified Lentz method, on whichever side of the a/(a+b) pivot
converges fastest, and checks its arguments the way the coders need. All of
them accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import logging
from typing import Union

import numpy as np
import scipy.special

from lowrank_mdl.errors import DomainError

_logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_FPMIN = 1e-300
_CF_EPS = 1e-15
_CF_MAX_ITER = 10000


def _scalar_or_array(arr: np.ndarray) -> ArrayLike:
    return float(arr) if arr.ndim == 0 else arr


def log_gamma(x: ArrayLike) -> ArrayLike:
    """Natural log of the Gamma function for x > 0."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("log_gamma is defined for finite x > 0")
    return _scalar_or_array(np.asarray(scipy.special.gammaln(arr)))


def log_beta(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """ln B(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return _scalar_or_array(np.asarray(scipy.special.betaln(a, b)))


def log2_binomial(n: ArrayLike, k: ArrayLike) -> ArrayLike:
    """log2 C(n, k) through log_gamma; exact 0 at k = 0 and k = n."""
    n = np.asarray(n, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    n, k = np.broadcast_arrays(n, k)
    out = np.zeros(n.shape, dtype=np.float64)
    inner = (k > 0) & (k < n)
    if np.any(inner):
        ni, ki = n[inner], k[inner]
        ln_c = (np.asarray(log_gamma(ni + 1.0)) - np.asarray(log_gamma(ki + 1.0))
                - np.asarray(log_gamma(ni - ki + 1.0)))
        out[inner] = np.maximum(ln_c, 0.0) / np.log(2.0)
    return _scalar_or_array(out)


def _guard(v: np.ndarray) -> np.ndarray:
    return np.where(np.abs(v) < _FPMIN, _FPMIN, v)


def _betacf(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Continued fraction for the incomplete Beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 / _guard(1.0 - qab * x / qap)
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 / _guard(1.0 + aa * d)
        c = _guard(1.0 + aa / c)
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 / _guard(1.0 + aa * d)
        c = _guard(1.0 + aa / c)
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _CF_EPS
        if not active.any():
            break
    else:
        _logger.warning("incomplete Beta continued fraction stopped after %d terms "
                        "for %d argument(s)", _CF_MAX_ITER, int(active.sum()))
    return h


def reg_inc_beta(x: ArrayLike, a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Regularized incomplete Beta function I(x; a, b).

    Uses I(x; a, b) = 1 - I(1 - x; b, a) beyond x = (a + 1) / (a + b + 2) so
    the continued fraction is always evaluated where it converges quickly.
    """
    x, a, b = np.broadcast_arrays(np.asarray(x, dtype=np.float64),
                                  np.asarray(a, dtype=np.float64),
                                  np.asarray(b, dtype=np.float64))
    if np.any(~np.isfinite(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("reg_inc_beta needs 0 <= x <= 1")
    if np.any(~(a > 0)) or np.any(~(b > 0)) or np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
        raise DomainError("reg_inc_beta needs finite a > 0 and b > 0")

    out = np.where(x >= 1.0, 1.0, 0.0)
    inner = (x > 0.0) & (x < 1.0)
    if not np.any(inner):
        return _scalar_or_array(out)

    xi, ai, bi = x[inner], a[inner], b[inner]
    direct = xi < (ai + 1.0) / (ai + bi + 2.0)
    xx = np.where(direct, xi, 1.0 - xi)
    aa = np.where(direct, ai, bi)
    bb = np.where(direct, bi, ai)
    log_front = aa * np.log(xx) + bb * np.log1p(-xx) - np.asarray(log_beta(aa, bb))
    value = np.exp(log_front) * _betacf(aa, bb, xx) / aa
    out[inner] = np.clip(np.where(direct, value, 1.0 - value), 0.0, 1.0)
    return _scalar_or_array(out)

