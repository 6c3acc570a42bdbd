"""Discrete outcome families conditioned on linear predictors.

Each family exposes exact probability machinery (PMF, CDF, left-limit
CDF, general inverse, moments, sampling, saturated log-likelihood) plus
the vectorized per-observation log-likelihood and score terms the
fitting module consumes.

Natural parameters are plain tuples, obtained from per-block linear
predictors via ``params_from_eta`` or supplied directly (in which case
mixture weights are validated).  CDF values are produced by a single
code path -- a cumulative sum of the PMF truncated once the tail mass
drops below ``TAIL_TOLERANCE`` -- so that grid construction, predicted
CDFs and the surrogate indicator all see bitwise-identical floats.

The negative binomial is parameterized by (size r, mean m) with
variance m + m^2 / r.  The source we follow never pins down which NB
parameterization it means; this is the conventional one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln

from ._errors import ParameterDomainError, UnsupportedFamilyError
from ._special import log_factorial

TAIL_TOLERANCE = 1e-12

_LINK_NAMES = ("log", "logit", "sqrt", "identity", "mlogit")


def _softplus(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


def _check_prob(name, value):
    if not (0.0 <= value <= 1.0) or not math.isfinite(value):
        raise ParameterDomainError(f"{name} must lie in [0, 1], got {value!r}")


class Family:
    """Base class; subclasses fill in the probability machinery."""

    kind: str
    block_names: tuple
    links: tuple

    # -- parameter handling ------------------------------------------------

    def params_from_eta(self, etas):
        """Natural parameters from one linear predictor per block."""
        raise NotImplementedError

    def validate_params(self, params):
        raise NotImplementedError

    # -- probability core --------------------------------------------------

    def pmf_array(self, params, kmax):
        """PMF over k = 0..kmax as an array; single source of truth."""
        raise NotImplementedError

    def _initial_kmax(self, params):
        raise NotImplementedError

    def cdf_array(self, params):
        """CDF over the enumerated support, truncated at the smallest K
        with cdf(K) > 1 - TAIL_TOLERANCE."""
        self.validate_params(params)
        kmax = max(self._initial_kmax(params), 1)
        while True:
            pmfs = self.pmf_array(params, kmax)
            cdf = np.cumsum(pmfs)
            beyond = np.nonzero(cdf > 1.0 - TAIL_TOLERANCE)[0]
            if beyond.size:
                return cdf[: beyond[0] + 1]
            # For large means, accumulated rounding can hold the total
            # mass just below the threshold forever; cut once the tail
            # PMF has stopped contributing anything representable.
            mode = int(np.argmax(pmfs))
            dead = np.nonzero((np.arange(kmax + 1) > mode) & (pmfs < 1e-17))[0]
            if dead.size:
                return cdf[: dead[0] + 1]
            if kmax > 50_000_000:  # pragma: no cover - malformed parameters
                raise ParameterDomainError(
                    f"tail of {self.kind} never accumulated: params={params!r}")
            kmax *= 2

    def pmf(self, k, params):
        self.validate_params(params)
        k = int(k)
        if k < 0:
            return 0.0
        return float(self.pmf_array(params, k)[k])

    def cdf(self, k, params):
        self.validate_params(params)
        k = int(k)
        if k < 0:
            return 0.0
        # Same prefix sums as cdf_array: cumsum from zero.
        return float(np.cumsum(self.pmf_array(params, k))[k])

    def cdf_left(self, k, params):
        """lim_{y -> k-} F(y) = F(k - 1), with F(-1) = 0."""
        k = int(k)
        if k <= 0:
            self.validate_params(params)
            return 0.0
        return self.cdf(k - 1, params)

    def general_inverse(self, s, params):
        """F^(-1)(s) = inf{y : s <= F(y) < 1} for s in (0, 1)."""
        if not (0.0 < s < 1.0):
            raise ParameterDomainError(f"s must lie in (0, 1), got {s!r}")
        cdf = self.cdf_array(params)
        while s > cdf[-1] and cdf[-1] < 1.0:
            cdf = np.cumsum(self.pmf_array(params, 2 * (cdf.size + 1)))
        return int(np.searchsorted(cdf, s, side="left"))

    # -- moments, sampling, likelihood --------------------------------------

    def mean_var(self, params):
        raise NotImplementedError

    def variance_function(self, mean):
        """V(mu) for Pearson residuals; only single-parameter families."""
        raise UnsupportedFamilyError(
            f"variance function is not defined for {self.kind}")

    def sample(self, params, rng, size=None):
        raise NotImplementedError

    def saturated_loglik(self, y):
        raise UnsupportedFamilyError(
            f"saturated log-likelihood is not defined for {self.kind}")

    def loglik_terms(self, y, etas):
        """Per-observation log-likelihood given per-block predictors."""
        raise NotImplementedError

    def score_eta(self, y, etas):
        """Per-observation d loglik / d eta, one array per block."""
        raise NotImplementedError


@dataclass(frozen=True)
class Poisson(Family):
    link: str = "log"
    kind: str = field(default="poisson", init=False)
    block_names: tuple = field(default=("count",), init=False)

    def __post_init__(self):
        if self.link not in ("log", "sqrt", "identity"):
            raise ParameterDomainError(f"unsupported Poisson link {self.link!r}")

    @property
    def links(self):
        return (self.link,)

    def _mean_from_eta(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.link == "log":
            return np.exp(eta)
        if self.link == "sqrt":
            return eta * eta
        return eta

    def params_from_eta(self, etas):
        lam = float(self._mean_from_eta(etas[0]))
        return (lam,)

    def validate_params(self, params):
        (lam,) = params
        if not math.isfinite(lam) or lam < 0.0:
            raise ParameterDomainError(f"Poisson mean must be >= 0, got {lam!r}")

    def pmf_array(self, params, kmax):
        (lam,) = params
        k = np.arange(kmax + 1)
        if lam == 0.0:
            out = np.zeros(kmax + 1)
            out[0] = 1.0
            return out
        return np.exp(k * math.log(lam) - lam - log_factorial(k))

    def _initial_kmax(self, params):
        (lam,) = params
        return int(lam + 10.0 * math.sqrt(lam) + 20.0)

    def mean_var(self, params):
        (lam,) = params
        return lam, lam

    def variance_function(self, mean):
        if mean <= 0.0:
            raise ParameterDomainError("Poisson mean must be positive")
        return float(mean)

    def sample(self, params, rng, size=None):
        (lam,) = params
        self.validate_params(params)
        return rng.poisson(lam, size=size)

    def saturated_loglik(self, y):
        y = int(y)
        if y == 0:
            return 0.0  # 0 log 0 = 0 convention
        return float(y * math.log(y) - y - log_factorial(y))

    def loglik_terms(self, y, etas):
        eta = np.asarray(etas[0], dtype=float)
        y = np.asarray(y, dtype=float)
        lam = self._mean_from_eta(eta)
        if self.link == "log":
            return y * eta - lam - log_factorial(y.astype(int))
        with np.errstate(divide="ignore", invalid="ignore"):
            log_lam = np.where(lam > 0.0, np.log(np.where(lam > 0.0, lam, 1.0)), -np.inf)
            terms = np.where(y > 0, y * log_lam, 0.0) - lam - log_factorial(y.astype(int))
        return terms

    def score_eta(self, y, etas):
        eta = np.asarray(etas[0], dtype=float)
        y = np.asarray(y, dtype=float)
        lam = self._mean_from_eta(eta)
        if self.link == "log":
            return [y - lam]
        if self.link == "sqrt":
            return [2.0 * (y / eta - eta)]
        return [y / lam - 1.0]


@dataclass(frozen=True)
class Bernoulli(Family):
    link: str = "logit"
    kind: str = field(default="bernoulli", init=False)
    block_names: tuple = field(default=("prob",), init=False)

    def __post_init__(self):
        if self.link != "logit":
            raise ParameterDomainError(f"unsupported Bernoulli link {self.link!r}")

    @property
    def links(self):
        return (self.link,)

    def params_from_eta(self, etas):
        return (float(expit(etas[0])),)

    def validate_params(self, params):
        (p,) = params
        _check_prob("Bernoulli p", p)

    def pmf_array(self, params, kmax):
        (p,) = params
        out = np.zeros(kmax + 1)
        out[0] = 1.0 - p
        if kmax >= 1:
            out[1] = p
        return out

    def _initial_kmax(self, params):
        return 1

    def mean_var(self, params):
        (p,) = params
        return p, p * (1.0 - p)

    def variance_function(self, mean):
        if not (0.0 < mean < 1.0):
            raise ParameterDomainError("Bernoulli mean must lie in (0, 1)")
        return float(mean * (1.0 - mean))

    def sample(self, params, rng, size=None):
        (p,) = params
        self.validate_params(params)
        if size is None:
            return int(rng.random() < p)
        return (rng.random(size) < p).astype(int)

    def saturated_loglik(self, y):
        return 0.0  # saturated probability is 1 at either outcome

    def loglik_terms(self, y, etas):
        eta = np.asarray(etas[0], dtype=float)
        y = np.asarray(y, dtype=float)
        return y * eta - _softplus(eta)

    def score_eta(self, y, etas):
        eta = np.asarray(etas[0], dtype=float)
        return [np.asarray(y, dtype=float) - expit(eta)]


@dataclass(frozen=True)
class NegativeBinomial(Family):
    """(size r, mean m) parameterization; variance m + m^2 / r."""

    size: float = 1.0
    link: str = "log"
    kind: str = field(default="negbin", init=False)
    block_names: tuple = field(default=("count",), init=False)

    def __post_init__(self):
        if not (self.size > 0.0 and math.isfinite(self.size)):
            raise ParameterDomainError(f"NB size must be positive, got {self.size!r}")
        if self.link != "log":
            raise ParameterDomainError(f"unsupported NB link {self.link!r}")

    @property
    def links(self):
        return (self.link,)

    def params_from_eta(self, etas):
        return (float(np.exp(etas[0])),)

    def validate_params(self, params):
        (m,) = params
        if not math.isfinite(m) or m < 0.0:
            raise ParameterDomainError(f"NB mean must be >= 0, got {m!r}")

    def pmf_array(self, params, kmax):
        (m,) = params
        r = self.size
        if m == 0.0:
            out = np.zeros(kmax + 1)
            out[0] = 1.0
            return out
        k = np.arange(kmax + 1)
        logpmf = (gammaln(k + r) - gammaln(r) - log_factorial(k)
                  + r * math.log(r / (r + m)) + k * math.log(m / (r + m)))
        return np.exp(logpmf)

    def _initial_kmax(self, params):
        (m,) = params
        sd = math.sqrt(m + m * m / self.size)
        return int(m + 10.0 * sd + 20.0)

    def mean_var(self, params):
        (m,) = params
        return m, m + m * m / self.size

    def variance_function(self, mean):
        if mean <= 0.0:
            raise ParameterDomainError("NB mean must be positive")
        return float(mean + mean * mean / self.size)

    def sample(self, params, rng, size=None):
        (m,) = params
        self.validate_params(params)
        if m == 0.0:
            return 0 if size is None else np.zeros(size, dtype=int)
        r = self.size
        return rng.negative_binomial(r, r / (r + m), size=size)

    def saturated_loglik(self, y):
        y = int(y)
        r = self.size
        if y == 0:
            return 0.0
        return float(gammaln(y + r) - gammaln(r) - log_factorial(y)
                     + r * math.log(r / (r + y)) + y * math.log(y / (r + y)))

    def loglik_terms(self, y, etas):
        eta = np.asarray(etas[0], dtype=float)
        y = np.asarray(y, dtype=float)
        r = self.size
        log_r_plus_m = np.logaddexp(math.log(r), eta)
        return (gammaln(y + r) - gammaln(r) - log_factorial(y.astype(int))
                + r * math.log(r) + y * eta - (y + r) * log_r_plus_m)

    def score_eta(self, y, etas):
        eta = np.asarray(etas[0], dtype=float)
        y = np.asarray(y, dtype=float)
        m = np.exp(eta)
        r = self.size
        return [r * (y - m) / (r + m)]


@dataclass(frozen=True)
class ZeroInflatedPoisson(Family):
    """Mixture: extra zeros with probability pi0, Poisson(lam) otherwise.

    Blocks: logit predictor for pi0, log predictor for lam.
    """

    kind: str = field(default="zip", init=False)
    block_names: tuple = field(default=("zero", "count"), init=False)
    links: tuple = field(default=("logit", "log"), init=False)

    def params_from_eta(self, etas):
        return (float(expit(etas[0])), float(np.exp(etas[1])))

    def validate_params(self, params):
        pi0, lam = params
        _check_prob("pi0", pi0)
        if not math.isfinite(lam) or lam < 0.0:
            raise ParameterDomainError(f"ZIP mean must be >= 0, got {lam!r}")

    def pmf_array(self, params, kmax):
        pi0, lam = params
        out = (1.0 - pi0) * Poisson().pmf_array((lam,), kmax)
        out[0] += pi0
        return out

    def _initial_kmax(self, params):
        _, lam = params
        return int(lam + 10.0 * math.sqrt(lam) + 20.0)

    def mean_var(self, params):
        pi0, lam = params
        mean = (1.0 - pi0) * lam
        second = (1.0 - pi0) * (lam + lam * lam)
        return mean, second - mean * mean

    def sample(self, params, rng, size=None):
        pi0, lam = params
        self.validate_params(params)
        if size is None:
            return 0 if rng.random() < pi0 else int(rng.poisson(lam))
        counts = rng.poisson(lam, size=size)
        return np.where(rng.random(size) < pi0, 0, counts)

    def loglik_terms(self, y, etas):
        eta0 = np.asarray(etas[0], dtype=float)
        eta1 = np.asarray(etas[1], dtype=float)
        y = np.asarray(y, dtype=float)
        lam = np.exp(eta1)
        log_pi0 = -_softplus(-eta0)
        log_one_minus = -_softplus(eta0)
        ll_zero = np.logaddexp(log_pi0, log_one_minus - lam)
        ll_pos = log_one_minus + y * eta1 - lam - log_factorial(y.astype(int))
        return np.where(y == 0, ll_zero, ll_pos)

    def score_eta(self, y, etas):
        eta0 = np.asarray(etas[0], dtype=float)
        eta1 = np.asarray(etas[1], dtype=float)
        y = np.asarray(y, dtype=float)
        pi0 = expit(eta0)
        lam = np.exp(eta1)
        exp_neg = np.exp(-lam)
        q0 = pi0 + (1.0 - pi0) * exp_neg
        is_zero = y == 0
        s0 = np.where(is_zero,
                      pi0 * (1.0 - pi0) * (1.0 - exp_neg) / q0,
                      -pi0)
        s1 = np.where(is_zero,
                      -(1.0 - pi0) * exp_neg * lam / q0,
                      y - lam)
        return [s0, s1]


@dataclass(frozen=True)
class ZeroOneInflatedPoisson(Family):
    """Extra zeros (pi0) and ones (pi1) on top of Poisson(lam).

    CDF: F(0) = pi0 + (1 - pi0 - pi1) exp(-lam); for k >= 1,
    F(k) = pi0 + pi1 + (1 - pi0 - pi1) * PoissonCDF(k).

    The two inflation blocks share a multinomial-logit link so that
    pi0 + pi1 < 1 holds for every predictor value; directly supplied
    probabilities are still validated.
    """

    kind: str = field(default="zoip", init=False)
    block_names: tuple = field(default=("zero", "one", "count"), init=False)
    links: tuple = field(default=("mlogit", "mlogit", "log"), init=False)

    def params_from_eta(self, etas):
        a, b = float(etas[0]), float(etas[1])
        m = max(0.0, a, b)
        e0, e1, ew = math.exp(a - m), math.exp(b - m), math.exp(-m)
        denom = e0 + e1 + ew
        return (e0 / denom, e1 / denom, float(np.exp(etas[2])))

    def validate_params(self, params):
        pi0, pi1, lam = params
        _check_prob("pi0", pi0)
        _check_prob("pi1", pi1)
        if pi0 + pi1 > 1.0:
            raise ParameterDomainError(
                f"mixture weights must satisfy pi0 + pi1 <= 1, got {pi0 + pi1!r}")
        if not math.isfinite(lam) or lam < 0.0:
            raise ParameterDomainError(f"ZOIP mean must be >= 0, got {lam!r}")

    def pmf_array(self, params, kmax):
        pi0, pi1, lam = params
        w = 1.0 - pi0 - pi1
        out = w * Poisson().pmf_array((lam,), kmax)
        out[0] += pi0
        if kmax >= 1:
            out[1] += pi1
        return out

    def _initial_kmax(self, params):
        lam = params[2]
        return max(int(lam + 10.0 * math.sqrt(lam) + 20.0), 1)

    def mean_var(self, params):
        pi0, pi1, lam = params
        w = 1.0 - pi0 - pi1
        mean = pi1 + w * lam
        second = pi1 + w * (lam + lam * lam)
        return mean, second - mean * mean

    def sample(self, params, rng, size=None):
        pi0, pi1, lam = params
        self.validate_params(params)
        if size is None:
            u = rng.random()
            if u < pi0:
                return 0
            if u < pi0 + pi1:
                return 1
            return int(rng.poisson(lam))
        u = rng.random(size)
        counts = rng.poisson(lam, size=size)
        out = np.where(u < pi0, 0, np.where(u < pi0 + pi1, 1, counts))
        return out

    def _pis_from_eta(self, eta_a, eta_b):
        m = np.maximum(0.0, np.maximum(eta_a, eta_b))
        e0 = np.exp(eta_a - m)
        e1 = np.exp(eta_b - m)
        ew = np.exp(-m)
        denom = e0 + e1 + ew
        return e0 / denom, e1 / denom, ew / denom

    def loglik_terms(self, y, etas):
        eta_a = np.asarray(etas[0], dtype=float)
        eta_b = np.asarray(etas[1], dtype=float)
        eta_c = np.asarray(etas[2], dtype=float)
        y = np.asarray(y, dtype=float)
        pi0, pi1, w = self._pis_from_eta(eta_a, eta_b)
        lam = np.exp(eta_c)
        p0 = np.exp(-lam)
        p1 = lam * p0
        f0 = pi0 + w * p0
        f1 = pi1 + w * p1
        with np.errstate(divide="ignore"):
            ll0 = np.log(f0)
            ll1 = np.log(f1)
            llk = np.log(w) + y * eta_c - lam - log_factorial(y.astype(int))
        return np.where(y == 0, ll0, np.where(y == 1, ll1, llk))

    def score_eta(self, y, etas):
        eta_a = np.asarray(etas[0], dtype=float)
        eta_b = np.asarray(etas[1], dtype=float)
        eta_c = np.asarray(etas[2], dtype=float)
        y = np.asarray(y, dtype=float)
        pi0, pi1, w = self._pis_from_eta(eta_a, eta_b)
        lam = np.exp(eta_c)
        p0 = np.exp(-lam)
        p1 = lam * p0
        f0 = pi0 + w * p0
        f1 = pi1 + w * p1
        is0 = y == 0
        is1 = y == 1
        sa = np.where(is0, pi0 * (1.0 - pi0 - w * p0) / f0, -pi0)
        sb = np.where(is1, pi1 * (1.0 - pi1 - w * p1) / f1, -pi1)
        sc = np.where(is0, -w * p0 * lam / f0,
                      np.where(is1, w * p1 * (1.0 - lam) / f1, y - lam))
        return [sa, sb, sc]


_FAMILY_FACTORIES = {
    "poisson": Poisson,
    "bernoulli": Bernoulli,
    "negbin": NegativeBinomial,
    "zip": ZeroInflatedPoisson,
    "zoip": ZeroOneInflatedPoisson,
}


def make_family(kind, *, link=None, size=None):
    """Resolve a family from a user-facing string."""
    kind = kind.lower()
    if kind not in _FAMILY_FACTORIES:
        raise ParameterDomainError(
            f"unknown family {kind!r}; choose from {sorted(_FAMILY_FACTORIES)}")
    kwargs = {}
    if kind == "negbin":
        kwargs["size"] = 1.0 if size is None else float(size)
    if link is not None and kind in ("poisson", "bernoulli"):
        kwargs["link"] = link
    return _FAMILY_FACTORIES[kind](**kwargs)
