"""Kernel-weighted surrogate empirical residual distribution function.

U-hat(s) is the weighted fraction of observations whose Cox-Snell
residual F-hat(Y_i|X_i) falls at or below the proximal grid point
H(s; X_i), with kernel weights decaying in |H(s; X_i) - s| / bandwidth.
Points where every kernel weight vanishes are recorded as gaps, never
interpolated; the bandwidth objective penalizes gaps so that a tiny
bandwidth cannot win by emptying the curve.

Weights are accumulated per s-point and combined in index order, so
results are identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._errors import BandwidthSelectionError, UndefinedCurveError
from .fitting import linear_predictors
from .grid import build_grid, h_nearest_values

# Unnormalized kernel mass (in units of the kernel's peak height) below
# which a curve point is flagged as low-information.
LOW_INFO_THRESHOLD = 5.0

DEFAULT_S_LO = 0.05
DEFAULT_S_HI = 0.95
DEFAULT_S_COUNT = 121
DEFAULT_L2_RANGE = (0.3, 0.9)


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel on [-1, 1] with its squared-integral and second moment."""

    name: str
    r2: float      # integral of K^2
    kappa2: float  # integral of u^2 K(u) du

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        if self.name == "epanechnikov":
            out = np.where(inside, 0.75 * (1.0 - u * u), 0.0)
        elif self.name == "quartic":
            t = 1.0 - u * u
            out = np.where(inside, (15.0 / 16.0) * t * t, 0.0)
        else:  # pragma: no cover
            raise ValueError(f"unknown kernel {self.name!r}")
        return float(out) if out.ndim == 0 else out

    @property
    def peak(self):
        return float(self.evaluate(0.0))


EPANECHNIKOV = Kernel("epanechnikov", r2=3.0 / 5.0, kappa2=1.0 / 5.0)
QUARTIC = Kernel("quartic", r2=5.0 / 7.0, kappa2=1.0 / 7.0)

_KERNELS = {"epanechnikov": EPANECHNIKOV, "quartic": QUARTIC}


def get_kernel(name):
    try:
        return _KERNELS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; choose from {sorted(_KERNELS)}") from None


def kernel_eval(kernel, u):
    return kernel.evaluate(u)


@dataclass(frozen=True)
class SurrogateCurve:
    s_values: np.ndarray
    u_values: np.ndarray       # NaN at undefined points
    defined: np.ndarray        # bool mask
    effective_n: np.ndarray    # kernel mass per s, in peak-height units
    bandwidth: float
    low_info: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.low_info is None:
            object.__setattr__(self, "low_info",
                               self.effective_n < LOW_INFO_THRESHOLD)

    def to_records(self):
        return [
            {"s": float(s), "u": (float(u) if d else None),
             "effective_n": float(e), "defined": bool(d)}
            for s, u, e, d in zip(self.s_values, self.u_values,
                                  self.effective_n, self.defined)
        ]


@dataclass(frozen=True)
class BandwidthSelection:
    bandwidth: float
    mesh: np.ndarray
    objectives: np.ndarray


def default_s_grid(lo=DEFAULT_S_LO, hi=DEFAULT_S_HI, count=DEFAULT_S_COUNT):
    return np.linspace(lo, hi, count)


def observation_grids(fitted, data):
    """Per-observation distribution grids and the Cox-Snell values,
    both taken from the same CDF enumeration for exact comparability."""
    etas = np.column_stack(linear_predictors(fitted, data.design))
    family = fitted.family
    grids = []
    fhat = np.empty(data.n)
    for i, y in enumerate(data.outcomes):
        params = family.params_from_eta(etas[i])
        grids.append(build_grid(family, params))
        fhat[i] = family.cdf(y, params)
    return grids, fhat


def h_matrix(grids, s_values):
    """n x m matrix of H(s; X_i) over the s grid."""
    s_values = np.asarray(s_values, dtype=float)
    H = np.empty((len(grids), s_values.size))
    for i, g in enumerate(grids):
        H[i] = h_nearest_values(s_values, g)
    return H


def _curve_from_h(H, fhat, s_values, kernel, bandwidth):
    indicator = fhat[:, None] <= H
    W = kernel.evaluate((H - s_values[None, :]) / bandwidth)
    num = np.sum(W * indicator, axis=0)
    den = np.sum(W, axis=0)
    defined = den > 0.0
    u = np.full(s_values.size, np.nan)
    u[defined] = num[defined] / den[defined]
    return SurrogateCurve(
        s_values=np.asarray(s_values, dtype=float),
        u_values=u,
        defined=defined,
        effective_n=den / kernel.peak,
        bandwidth=float(bandwidth),
    )


def u_hat(s, fitted, data, kernel, bandwidth, *, precomputed=None):
    """U-hat at a single s; returns (value-or-None, effective_n)."""
    if precomputed is None:
        precomputed = observation_grids(fitted, data)
    grids, fhat = precomputed
    curve = _curve_from_h(h_matrix(grids, [s]), fhat, np.asarray([s]),
                          kernel, bandwidth)
    if not curve.defined[0]:
        return None, 0.0
    return float(curve.u_values[0]), float(curve.effective_n[0])


def surrogate_curve(fitted, data, kernel, bandwidth, s_grid=None, *,
                    precomputed=None):
    """Pointwise U-hat over the s grid, gaps recorded where undefined."""
    if s_grid is None:
        s_grid = default_s_grid()
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any((s_grid <= 0.0) | (s_grid >= 1.0)):
        raise ValueError("s_grid must lie strictly inside (0, 1)")
    if precomputed is None:
        precomputed = observation_grids(fitted, data)
    grids, fhat = precomputed
    return _curve_from_h(h_matrix(grids, s_grid), fhat, s_grid,
                         kernel, bandwidth)


def default_bandwidth_mesh(fitted, data, *, count=25, precomputed=None):
    """25 log-spaced bandwidths in [0.5, 3] * n^{-1/5} * sd(H(0.5; X_i))."""
    if precomputed is None:
        precomputed = observation_grids(fitted, data)
    grids, _ = precomputed
    h_mid = h_matrix(grids, [0.5])[:, 0]
    sigma = float(np.std(h_mid))
    sigma = max(sigma, 1e-3)
    pilot = len(grids) ** -0.2 * sigma
    return np.geomspace(0.5 * pilot, 3.0 * pilot, count)


def _objective(curve):
    """Riemann L2 distance to the identity, gaps charged the worst case."""
    s = curve.s_values
    ds = s[1] - s[0] if s.size > 1 else 1.0
    sq = np.where(curve.defined,
                  np.where(curve.defined, curve.u_values - s, 0.0) ** 2,
                  np.maximum(s, 1.0 - s) ** 2)
    return float(np.sum(sq) * ds)


def select_bandwidth(fitted, data, kernel, s_grid=None, eps_mesh=None, *,
                     precomputed=None):
    """Minimize the gap-penalized L2 objective over the bandwidth mesh."""
    if precomputed is None:
        precomputed = observation_grids(fitted, data)
    if s_grid is None:
        s_grid = default_s_grid()
    s_grid = np.asarray(s_grid, dtype=float)
    if eps_mesh is None:
        eps_mesh = default_bandwidth_mesh(fitted, data, precomputed=precomputed)
    eps_mesh = np.asarray(eps_mesh, dtype=float)
    if eps_mesh.size == 0 or np.any(eps_mesh <= 0.0):
        raise ValueError("bandwidth mesh must be nonempty and positive")
    grids, fhat = precomputed
    H = h_matrix(grids, s_grid)
    objectives = np.empty(eps_mesh.size)
    any_defined = False
    for j, eps in enumerate(eps_mesh):
        curve = _curve_from_h(H, fhat, s_grid, kernel, eps)
        any_defined = any_defined or bool(np.any(curve.defined))
        objectives[j] = _objective(curve)
    if not any_defined:
        raise BandwidthSelectionError(
            "surrogate curve undefined at every bandwidth on the mesh")
    best = int(np.argmin(objectives))
    return BandwidthSelection(bandwidth=float(eps_mesh[best]),
                              mesh=eps_mesh, objectives=objectives)


def l2_distance(curve, s_range=DEFAULT_L2_RANGE):
    """Riemann integral of (U-hat(s) - s)^2 over defined points in the range."""
    lo, hi = s_range
    s = curve.s_values
    if lo < s.min() - 1e-12 or hi > s.max() + 1e-12:
        raise ValueError(
            f"range [{lo}, {hi}] is outside the curve span "
            f"[{s.min()}, {s.max()}]")
    ds = s[1] - s[0] if s.size > 1 else 1.0
    mask = (s >= lo - 1e-12) & (s <= hi + 1e-12) & curve.defined
    if not np.any(mask):
        raise UndefinedCurveError(
            f"no defined curve points inside [{lo}, {hi}]")
    dev = curve.u_values[mask] - s[mask]
    return float(np.sum(dev * dev) * ds)


def sup_deviation(curve, s_range=(0.2, 0.8)):
    """sup |U-hat(s) - s| over defined points in the range."""
    lo, hi = s_range
    s = curve.s_values
    mask = (s >= lo - 1e-12) & (s <= hi + 1e-12) & curve.defined
    if not np.any(mask):
        raise UndefinedCurveError(
            f"no defined curve points inside [{lo}, {hi}]")
    return float(np.max(np.abs(curve.u_values[mask] - s[mask])))


def variance_probe(scenario, s, n_list, seeds, *, c=0.5, kernel=EPANECHNIKOV,
                   fit_label="true"):
    """Empirical Var[U-hat(s)] across sample sizes, bandwidth c * n^{-1/5}.

    Returns one row per sample size: n, bandwidth, variance, mean, and
    the count of seeds that produced a defined value.
    """
    from . import simlab  # runtime import; simlab depends on this module
    from .fitting import fit

    rows = []
    for n in n_list:
        eps = c * n ** -0.2
        values = []
        for seed in seeds:
            rng = simlab.replication_rng(seed, 0)
            data = simlab.generate(scenario, n, rng)
            spec = scenario.fit_specs[fit_label]
            fitted = fit(spec, data)
            value, _ = u_hat(s, fitted, data, kernel, eps)
            if value is not None:
                values.append(value)
        values = np.asarray(values)
        rows.append({
            "n": int(n),
            "bandwidth": float(eps),
            "n_defined": int(values.size),
            "mean": float(np.mean(values)) if values.size else math.nan,
            "variance": float(np.var(values, ddof=1)) if values.size > 1 else math.nan,
        })
    return rows
