"""Small numerical helpers: cached log-factorials and normal quantiles.

The log-factorial table is a cumulative sum of ``log k`` extended on
demand, so repeated PMF evaluations in hot loops never re-enter
``lgamma``.  The normal quantile is a rational approximation (Acklam)
polished with one Halley step, accurate to well below 1e-9 over
``(1e-15, 1 - 1e-15)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfc

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)

# Cumulative log-factorial table; _LOGFACT[k] == log(k!).
_LOGFACT = np.zeros(128)
_LOGFACT[1:] = np.cumsum(np.log(np.arange(1, 128)))


def log_factorial(k):
    """log(k!) for non-negative integer scalars or arrays."""
    global _LOGFACT
    k = np.asarray(k)
    kmax = int(k.max()) if k.size else 0
    if kmax >= _LOGFACT.size:
        old = _LOGFACT
        new_size = max(kmax + 1, 2 * old.size)
        ext = np.empty(new_size)
        ext[: old.size] = old
        ext[old.size:] = old[-1] + np.cumsum(np.log(np.arange(old.size, new_size)))
        _LOGFACT = ext
    out = _LOGFACT[k]
    return float(out) if out.ndim == 0 else out


def normal_cdf(x):
    """Standard normal CDF."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(-x / _SQRT2)
    return float(out) if out.ndim == 0 else out


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT2PI
    return float(out) if out.ndim == 0 else out


# Acklam rational-approximation coefficients.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(p):
    p = np.asarray(p, dtype=float)
    x = np.empty_like(p)

    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = q * num / den
    if np.any(lo):
        q = np.sqrt(-2.0 * np.log(p[lo]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[lo] = num / den
    if np.any(hi):
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[hi] = -num / den
    return x


def normal_quantile(p):
    """Inverse standard normal CDF; inputs clamped to (1e-15, 1 - 1e-15)."""
    p = np.clip(np.asarray(p, dtype=float), 1e-15, 1.0 - 1e-15)
    # Work in the lower tail (q <= 0.5) where the CDF keeps full relative
    # precision; 1 - p is exact for p >= 0.5 and the result flips sign.
    flip = p > 0.5
    q = np.where(flip, 1.0 - p, p)
    x = _acklam(q)
    # Two Halley steps bring the rational approximation near machine
    # precision across the clamped range.
    for _ in range(2):
        e = normal_cdf(x) - q
        u = e * _SQRT2PI * np.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    x = np.where(flip, -x, x)
    return float(x) if x.ndim == 0 else x
