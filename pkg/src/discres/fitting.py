"""Maximum-likelihood fitting for the regression models the diagnostics consume.

The optimizer is Newton-Raphson with step-halving on all coefficient
blocks jointly.  Scores are analytic (supplied by the families);
Hessians come from central finite differences of the analytic score,
which keeps every family on one code path.  The negative binomial size
is profiled: inner Newton on the coefficients for fixed size, outer
golden-section search on log(size) over [log 0.01, log 100].

Standard errors are the square roots of the diagonal of the inverse
observed information at the optimum (profile information for the NB,
i.e. at the fitted size).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import families as fam
from ._errors import (
    DataFormatError,
    NonConvergenceError,
    SeparationError,
    SingularDesignError,
)

DEFAULT_GRADIENT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
_FD_STEP = 1e-5
_SEPARATION_NORM = 50.0
_SQRT_LINK_MEAN_FLOOR = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Design matrix (first column 1 by convention) and integer outcomes."""

    design: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        y = np.asarray(self.outcomes)
        if X.ndim != 2:
            raise DataFormatError("design must be a 2-D matrix")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataFormatError("outcomes must be a vector matching the design rows")
        if X.shape[0] < X.shape[1]:
            raise DataFormatError("need at least as many observations as columns")
        if not np.all(np.isfinite(X)):
            raise DataFormatError("design contains non-finite values")
        if np.any(y < 0) or not np.all(y == np.floor(y)):
            raise DataFormatError("outcomes must be non-negative integers")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "outcomes", y.astype(int))
        if not any(np.unique(X[:, j]).size > 2 for j in range(X.shape[1])):
            warnings.warn(
                "no non-constant continuous column in the design; the surrogate "
                "diagnostic needs at least one continuous covariate to be valid",
                stacklevel=2)

    @property
    def n(self):
        return self.design.shape[0]


@dataclass(frozen=True)
class ModelSpec:
    """Family plus design-column indices for each parameter block."""

    family: fam.Family
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(int(c) for c in b) for b in self.blocks)
        if len(blocks) != len(self.family.block_names):
            raise DataFormatError(
                f"{self.family.kind} needs {len(self.family.block_names)} "
                f"column blocks, got {len(blocks)}")
        object.__setattr__(self, "blocks", blocks)

    def validate_against(self, data):
        p = data.design.shape[1]
        for cols in self.blocks:
            if any(c < 0 or c >= p for c in cols):
                raise DataFormatError(f"block columns {cols} out of range for p={p}")

    def split(self, theta):
        """Flat coefficient vector -> one array per block."""
        out, pos = [], 0
        for cols in self.blocks:
            out.append(np.asarray(theta[pos:pos + len(cols)], dtype=float))
            pos += len(cols)
        return out

    @property
    def n_coefficients(self):
        return sum(len(b) for b in self.blocks)


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    coefficients: tuple
    loglik: float
    standard_errors: tuple
    converged: bool
    iterations: int
    auxiliary: dict = field(default_factory=dict)

    @property
    def family(self):
        """Family used for prediction; carries the fitted NB size."""
        f = self.spec.family
        if isinstance(f, fam.NegativeBinomial) and "size" in self.auxiliary:
            return fam.NegativeBinomial(size=self.auxiliary["size"], link=f.link)
        return f


def _etas(spec, X, coef_blocks):
    return [X[:, cols] @ beta for cols, beta in zip(spec.blocks, coef_blocks)]


def loglik(spec, data, coefficients):
    """Total log-likelihood at the given per-block coefficients."""
    etas = _etas(spec, data.design, list(coefficients))
    return float(np.sum(spec.family.loglik_terms(data.outcomes, etas)))


def score(spec, data, coefficients):
    """Analytic score (flat, concatenated over blocks)."""
    etas = _etas(spec, data.design, list(coefficients))
    per_eta = spec.family.score_eta(data.outcomes, etas)
    return np.concatenate([data.design[:, cols].T @ s
                           for cols, s in zip(spec.blocks, per_eta)])


def _loglik_flat(spec, data, theta):
    return loglik(spec, data, spec.split(theta))


def _score_flat(spec, data, theta):
    return score(spec, data, spec.split(theta))


def observed_information(spec, data, theta, step=_FD_STEP):
    """Negative Hessian via central finite differences of the analytic score."""
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    H = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = step
        H[:, j] = (_score_flat(spec, data, theta + e)
                   - _score_flat(spec, data, theta - e)) / (2.0 * step)
    H = 0.5 * (H + H.T)
    return -H


def _admissible(spec, data, theta):
    """Reject sqrt-link iterates with any fitted mean at the boundary."""
    f = spec.family
    if isinstance(f, fam.Poisson) and f.link == "sqrt":
        eta = data.design[:, spec.blocks[0]] @ spec.split(theta)[0]
        if np.any(eta * eta <= _SQRT_LINK_MEAN_FLOOR):
            return False
    if isinstance(f, fam.Poisson) and f.link == "identity":
        eta = data.design[:, spec.blocks[0]] @ spec.split(theta)[0]
        if np.any(eta <= 0.0):
            return False
    return True


def _check_rank(spec, data):
    for cols in spec.blocks:
        Xb = data.design[:, cols]
        if np.linalg.matrix_rank(Xb) < len(cols):
            raise SingularDesignError(
                f"design columns {cols} are rank deficient")


def _initial_theta(spec, data):
    y = data.outcomes
    X = data.design
    f = spec.family
    blocks = []
    ybar = float(np.mean(y))

    def intercept_init(cols, value):
        beta = np.zeros(len(cols))
        for i, c in enumerate(cols):
            if np.all(X[:, c] == 1.0):
                beta[i] = value
                break
        return beta

    if isinstance(f, fam.Poisson) and f.link == "sqrt":
        blocks.append(_sqrt_link_init(X[:, spec.blocks[0]], y))
    elif isinstance(f, (fam.Poisson, fam.NegativeBinomial)) and f.link == "log":
        # Least squares on log(y + 0.5) lands near the optimum and keeps
        # the first Newton steps out of the overshoot region.
        Xb = X[:, spec.blocks[0]]
        beta, *_ = np.linalg.lstsq(Xb, np.log(y + 0.5), rcond=None)
        blocks.append(beta)
    elif isinstance(f, (fam.Poisson, fam.NegativeBinomial)):
        blocks.append(intercept_init(spec.blocks[0], math.log(ybar + 0.1)))
    elif isinstance(f, fam.Bernoulli):
        p0 = min(max(ybar, 0.01), 0.99)
        blocks.append(intercept_init(spec.blocks[0], math.log(p0 / (1.0 - p0))))
    elif isinstance(f, fam.ZeroInflatedPoisson):
        pois = ModelSpec(fam.Poisson(), (spec.blocks[1],))
        base = _newton(pois, data, _initial_theta(pois, data),
                       tol=1e-6, max_iter=50)
        lam_hat = np.exp(X[:, spec.blocks[1]] @ base.coefficients[0])
        frac0 = float(np.mean(y == 0))
        q0 = float(np.mean(np.exp(-lam_hat)))
        excess = min(max((frac0 - q0) / max(1.0 - q0, 1e-6), 1e-3), 0.99)
        blocks.append(intercept_init(spec.blocks[0],
                                     math.log(excess / (1.0 - excess))))
        blocks.append(base.coefficients[0])
    elif isinstance(f, fam.ZeroOneInflatedPoisson):
        pois = ModelSpec(fam.Poisson(), (spec.blocks[2],))
        base = _newton(pois, data, _initial_theta(pois, data),
                       tol=1e-6, max_iter=50)
        lam_hat = np.exp(X[:, spec.blocks[2]] @ base.coefficients[0])
        frac0 = float(np.mean(y == 0))
        frac1 = float(np.mean(y == 1))
        q0 = float(np.mean(np.exp(-lam_hat)))
        q1 = float(np.mean(lam_hat * np.exp(-lam_hat)))
        pi0 = min(max((frac0 - q0) / max(1.0 - q0, 1e-6), 1e-3), 0.9)
        pi1 = min(max((frac1 - q1) / max(1.0 - q1, 1e-6), 1e-3), 0.9)
        scale = pi0 + pi1
        if scale > 0.95:
            pi0, pi1 = 0.95 * pi0 / scale, 0.95 * pi1 / scale
        w = 1.0 - pi0 - pi1
        blocks.append(intercept_init(spec.blocks[0], math.log(pi0 / w)))
        blocks.append(intercept_init(spec.blocks[1], math.log(pi1 / w)))
        blocks.append(base.coefficients[0])
    else:  # pragma: no cover
        blocks = [np.zeros(len(cols)) for cols in spec.blocks]
    return np.concatenate(blocks)


def _sqrt_link_init(Xb, y):
    """Spectral initializer for the sqrt link.

    The mean is (x'beta)^2 = x' (beta beta') x, so regressing y on the
    quadratic expansion of x recovers beta beta' up to noise; the
    scaled leading eigenvector is a sign-consistent starting point,
    which a naive regression of sqrt(y) on x (targeting |x'beta|) is not.
    """
    n, p = Xb.shape
    feats = np.empty((n, p * (p + 1) // 2))
    pairs = []
    col = 0
    for j in range(p):
        for k in range(j, p):
            feats[:, col] = Xb[:, j] * Xb[:, k] * (1.0 if j == k else 2.0)
            pairs.append((j, k))
            col += 1
    coef, *_ = np.linalg.lstsq(feats, y.astype(float), rcond=None)
    M = np.zeros((p, p))
    for (j, k), c in zip(pairs, coef):
        M[j, k] = c
        M[k, j] = c
    eigvals, eigvecs = np.linalg.eigh(M)
    lead = eigvecs[:, -1] * math.sqrt(max(eigvals[-1], 1e-6))
    # Alternating refinement: fix the per-observation signs implied by
    # the current beta and regress the signed sqrt outcome on x.
    target = np.sqrt(y + 0.25)
    beta = lead
    for _ in range(10):
        signs = np.where(Xb @ beta >= 0.0, 1.0, -1.0)
        new, *_ = np.linalg.lstsq(Xb, signs * target, rcond=None)
        if np.allclose(new, beta, atol=1e-10):
            beta = new
            break
        beta = new
    return beta


def _ascent_direction(info, g):
    """Solve info @ step = g, ridging until positive definite.

    Mixture likelihoods can have an indefinite observed information away
    from the optimum; a Newton direction through it need not be an
    ascent direction, so escalate a diagonal ridge until Cholesky
    succeeds.  A positive-definite info takes the plain Newton step.
    """
    p = info.shape[0]
    eye = np.eye(p)
    ridge = 0.0
    base = (float(np.abs(np.diag(info)).max()) + 1.0) * 1e-8
    for _ in range(20):
        try:
            L = np.linalg.cholesky(info + ridge * eye)
        except np.linalg.LinAlgError:
            ridge = base if ridge == 0.0 else 10.0 * ridge
            continue
        step = np.linalg.solve(L.T, np.linalg.solve(L, g))
        if np.all(np.isfinite(step)):
            return step
        ridge = base if ridge == 0.0 else 10.0 * ridge
    return g / (1.0 + float(np.abs(g).max()))


def _newton(spec, data, theta0, tol, max_iter):
    theta = np.asarray(theta0, dtype=float)
    ll = _loglik_flat(spec, data, theta)
    if not math.isfinite(ll):
        theta = np.zeros_like(theta)
        ll = _loglik_flat(spec, data, theta)
    iterations = 0
    g = _score_flat(spec, data, theta)
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol:
            break
        if isinstance(spec.family, fam.Bernoulli) and \
                float(np.max(np.abs(theta))) > _SEPARATION_NORM:
            raise SeparationError(
                "coefficient norm exploding; data are likely completely separated")
        info = observed_information(spec, data, theta)
        step = _ascent_direction(info, g)
        # Near the optimum the per-step likelihood gain falls below float
        # resolution and a likelihood line search stalls on noise; accept
        # the full Newton step outright whenever it at least halves the
        # gradient norm (quadratic contraction makes this the common case).
        cand = theta + step
        if _admissible(spec, data, cand):
            ll_cand = _loglik_flat(spec, data, cand)
            g_cand = _score_flat(spec, data, cand)
            if math.isfinite(ll_cand) and \
                    float(np.max(np.abs(g_cand))) <= 0.5 * gnorm:
                theta, ll, g = cand, ll_cand, g_cand
                continue
        t = 1.0
        accepted = False
        while t >= 2.0 ** -30:
            cand = theta + t * step
            if _admissible(spec, data, cand):
                ll_cand = _loglik_flat(spec, data, cand)
                if math.isfinite(ll_cand) and ll_cand >= ll - 1e-12:
                    theta, ll = cand, ll_cand
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            # Near the optimum the per-step likelihood gain can fall below
            # float resolution (|loglik| is large); accept the Newton step
            # anyway when it strictly shrinks the gradient norm.
            cand = theta + step
            if _admissible(spec, data, cand):
                ll_cand = _loglik_flat(spec, data, cand)
                g_cand = _score_flat(spec, data, cand)
                if math.isfinite(ll_cand) and \
                        float(np.max(np.abs(g_cand))) < gnorm:
                    theta, ll, g = cand, ll_cand, g_cand
                    continue
            # No ascent direction left; report wherever we stalled.
            break
        g = _score_flat(spec, data, theta)
    else:
        raise NonConvergenceError(
            f"no convergence after {max_iter} iterations "
            f"(max |score| = {np.max(np.abs(g)):.3e})",
            last_coefficients=tuple(spec.split(theta)),
            last_gradient_norm=float(np.max(np.abs(g))))
    gnorm = float(np.max(np.abs(g)))
    if isinstance(spec.family, fam.Bernoulli) and ll > -1e-6:
        # Every outcome predicted with probability 1: the likelihood has
        # no interior maximum and the coefficients are not identified.
        raise SeparationError(
            "log-likelihood at the optimum is 0; data are completely separated")
    if gnorm > tol:
        raise NonConvergenceError(
            f"stalled with max |score| = {gnorm:.3e} > tol {tol:.1e}",
            last_coefficients=tuple(spec.split(theta)),
            last_gradient_norm=gnorm)
    info = observed_information(spec, data, theta)
    se = _standard_errors(info)
    return FittedModel(
        spec=spec,
        coefficients=tuple(spec.split(theta)),
        loglik=ll,
        standard_errors=tuple(spec.split(se)),
        converged=True,
        iterations=iterations,
    )


def _standard_errors(info):
    try:
        cov = np.linalg.inv(info)
        diag = np.diag(cov)
        return np.sqrt(np.where(diag > 0.0, diag, np.nan))
    except np.linalg.LinAlgError:
        return np.full(info.shape[0], np.nan)


def _fit_negbin(spec, data, tol, max_iter):
    lo, hi = math.log(0.01), math.log(100.0)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    cache = {}

    def profile(logr):
        if logr not in cache:
            f = fam.NegativeBinomial(size=math.exp(logr), link=spec.family.link)
            sub = ModelSpec(f, spec.blocks)
            fitted = _newton(sub, data, _initial_theta(sub, data), tol, max_iter)
            cache[logr] = fitted
        return cache[logr]

    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = profile(c).loglik, profile(d).loglik
    for _ in range(60):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = profile(c).loglik
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = profile(d).loglik
    best_logr = c if fc >= fd else d
    inner = profile(best_logr)
    return FittedModel(
        spec=spec,
        coefficients=inner.coefficients,
        loglik=inner.loglik,
        standard_errors=inner.standard_errors,
        converged=True,
        iterations=inner.iterations,
        auxiliary={"size": math.exp(best_logr)},
    )


def fit(spec, data, *, tol=DEFAULT_GRADIENT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Maximum-likelihood fit; see module docstring for the algorithm."""
    spec.validate_against(data)
    _check_rank(spec, data)
    if isinstance(spec.family, fam.NegativeBinomial):
        return _fit_negbin(spec, data, tol, max_iter)
    return _newton(spec, data, _initial_theta(spec, data), tol, max_iter)


def linear_predictors(fitted, X):
    """Per-block linear predictors for design rows X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return [X[:, cols] @ beta
            for cols, beta in zip(fitted.spec.blocks, fitted.coefficients)]


def predict_params(fitted, x_row):
    """Natural parameters at one covariate row."""
    etas = [float(e[0]) for e in linear_predictors(fitted, x_row)]
    return fitted.family.params_from_eta(etas)


def predict_cdf(fitted, x_row, k):
    """F-hat(k | x) at one covariate row."""
    return fitted.family.cdf(k, predict_params(fitted, x_row))


def predict_mean_var(fitted, data):
    """Vectors of fitted means and variances over a dataset."""
    etas = linear_predictors(fitted, data.design)
    n = data.n
    means = np.empty(n)
    variances = np.empty(n)
    family = fitted.family
    eta_mat = np.column_stack(etas)
    for i in range(n):
        m, v = family.mean_var(family.params_from_eta(eta_mat[i]))
        means[i], variances[i] = m, v
    return means, variances
