"""Classical residuals and their reference-pattern curves.

Covers the Cox-Snell empirical residual distribution function, Pearson
and deviance residuals, randomized quantile residuals, and P-P curve
extraction with (i - 0.5)/n plotting positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import families as fam
from ._errors import DegenerateDistributionError, UnsupportedFamilyError
from ._special import normal_cdf, normal_quantile
from .fitting import linear_predictors, predict_mean_var


class Reference(Enum):
    UNIFORM = "uniform01"
    NORMAL = "standard_normal"


@dataclass(frozen=True)
class ResidualVector:
    kind: str
    values: np.ndarray
    reference: Reference


@dataclass(frozen=True)
class PPCurve:
    theoretical: np.ndarray
    empirical: np.ndarray


def cox_snell_values(fitted, data):
    """Fitted-CDF residuals F-hat(Y_i | X_i)."""
    etas = np.column_stack(linear_predictors(fitted, data.design))
    family = fitted.family
    out = np.empty(data.n)
    for i, y in enumerate(data.outcomes):
        out[i] = family.cdf(y, family.params_from_eta(etas[i]))
    return out


def cox_snell_ecdf(fitted, data, s_grid):
    """Empirical residual distribution function of the Cox-Snell residuals."""
    values = cox_snell_values(fitted, data)
    s_grid = np.asarray(s_grid, dtype=float)
    counts = np.count_nonzero(values[:, None] <= s_grid[None, :], axis=0)
    return counts / data.n


def pearson(fitted, data):
    """(Y - mu-hat) / sqrt(V(mu-hat)); mixture families use the model variance."""
    means, variances = predict_mean_var(fitted, data)
    if np.any(variances <= 0.0):
        raise DegenerateDistributionError(
            "zero fitted variance; Pearson residuals undefined")
    values = (data.outcomes - means) / np.sqrt(variances)
    return ResidualVector("pearson", values, Reference.NORMAL)


def deviance(fitted, data):
    """Signed sqrt of twice the saturated-minus-fitted likelihood gap."""
    family = fitted.family
    if isinstance(family, (fam.ZeroInflatedPoisson, fam.ZeroOneInflatedPoisson)):
        raise UnsupportedFamilyError(
            "deviance residuals are not defined for families with more than "
            "one location parameter")
    etas = [np.asarray(e) for e in linear_predictors(fitted, data.design)]
    fitted_ll = family.loglik_terms(data.outcomes, etas)
    saturated_ll = np.array([family.saturated_loglik(y) for y in data.outcomes])
    means, _ = predict_mean_var(fitted, data)
    gap = np.maximum(2.0 * (saturated_ll - fitted_ll), 0.0)
    values = np.sign(data.outcomes - means) * np.sqrt(gap)
    return ResidualVector("deviance", values, Reference.NORMAL)


def randomized_quantile(fitted, data, rng):
    """Phi^{-1}(U_i), U_i uniform on (F-hat(Y_i-), F-hat(Y_i)]."""
    etas = np.column_stack(linear_predictors(fitted, data.design))
    family = fitted.family
    n = data.n
    a = np.empty(n)
    b = np.empty(n)
    for i, y in enumerate(data.outcomes):
        params = family.params_from_eta(etas[i])
        b[i] = family.cdf(y, params)
        a[i] = family.cdf_left(y, params)
    u = b - (b - a) * rng.random(n)  # lands in (a, b]
    values = normal_quantile(u)
    return ResidualVector("randomized_quantile", values, Reference.NORMAL)


def _reference_cdf(reference, x):
    if reference is Reference.UNIFORM:
        return np.clip(x, 0.0, 1.0)
    return normal_cdf(x)


def pp_curve(residuals):
    """P-P coordinates: reference CDF at sorted values vs (i - 0.5)/n."""
    values = np.sort(np.asarray(residuals.values, dtype=float))
    if values.size == 0:
        raise ValueError("empty residual vector")
    n = values.size
    theoretical = _reference_cdf(residuals.reference, values)
    empirical = (np.arange(1, n + 1) - 0.5) / n
    return PPCurve(theoretical=theoretical, empirical=empirical)


def ks_distance(residuals):
    """Kolmogorov-Smirnov distance of the residuals from their reference."""
    values = np.sort(np.asarray(residuals.values, dtype=float))
    n = values.size
    cdf = _reference_cdf(residuals.reference, values)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(np.abs(cdf - upper)), np.max(np.abs(cdf - lower))))
