"""Conditional distribution grids and the proximal interpolator.

The grid at a covariate point is the set of attainable CDF values
{F(k|x)} with the boundary value 1 removed and the tail truncated by
the families module.  ``h_nearest`` maps a probability s to its
nearest interior grid point, sending exact ties (H+ + H- == 2s) to the
upper neighbor; tie detection is an exact float comparison on purpose,
since any epsilon would move the boundary cases.

``pit_probability`` is the exact oracle for the discrete probability
integral transform: P(F(Y|x) <= s) equals s precisely when s is a grid
value and falls strictly below s everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._errors import DegenerateDistributionError, ParameterDomainError


class Side(Enum):
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class DistributionGrid:
    """Sorted interior CDF values and the outcome k producing each."""

    values: np.ndarray
    ks: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "ks", np.asarray(self.ks, dtype=int))

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class NearestGridPoint:
    value: float
    k: int
    side: Side


def build_grid(family, params):
    """Interior grid Lambda(x) \\ {1} for the family at the given parameters."""
    cdf = family.cdf_array(params)
    ks = np.arange(cdf.size)
    # Interior points only; drop underflowed zeros and the boundary 1.
    keep = (cdf > 0.0) & (cdf < 1.0)
    cdf, ks = cdf[keep], ks[keep]
    if cdf.size:
        # Dedupe float-identical plateaus, keeping the smallest k.
        first = np.concatenate(([True], np.diff(cdf) > 0.0))
        cdf, ks = cdf[first], ks[first]
    if not cdf.size:
        raise DegenerateDistributionError(
            f"distribution at params={params!r} has no interior grid points")
    return DistributionGrid(values=cdf, ks=ks)


def _check_s(s):
    if not (0.0 < s < 1.0):
        raise ParameterDomainError(f"s must lie in (0, 1), got {s!r}")


def h_plus(s, grid):
    """Smallest interior grid value >= s, or None if s is above the grid."""
    _check_s(s)
    idx = int(np.searchsorted(grid.values, s, side="left"))
    if idx == len(grid):
        return None
    return float(grid.values[idx])


def h_minus(s, grid):
    """Largest interior grid value <= s, or None if s is below the grid."""
    _check_s(s)
    idx = int(np.searchsorted(grid.values, s, side="right")) - 1
    if idx < 0:
        return None
    return float(grid.values[idx])


def h_nearest(s, grid):
    """Nearest interior grid point, ties to the upper neighbor."""
    _check_s(s)
    if len(grid) == 0:
        raise DegenerateDistributionError("grid is empty")
    lo = int(np.searchsorted(grid.values, s, side="right")) - 1
    hi = int(np.searchsorted(grid.values, s, side="left"))
    if lo < 0:  # s below F(0|x)
        return NearestGridPoint(float(grid.values[0]), int(grid.ks[0]), Side.PLUS)
    if hi == len(grid):  # s above max(Lambda(x) \ {1})
        return NearestGridPoint(float(grid.values[-1]), int(grid.ks[-1]), Side.MINUS)
    hp, hm = float(grid.values[hi]), float(grid.values[lo])
    if hp + hm <= 2.0 * s:
        return NearestGridPoint(hp, int(grid.ks[hi]), Side.PLUS)
    return NearestGridPoint(hm, int(grid.ks[lo]), Side.MINUS)


def h_nearest_values(s_values, grid):
    """Vectorized ``h_nearest(.).value`` over an array of s in (0, 1)."""
    s = np.asarray(s_values, dtype=float)
    v = grid.values
    lo = np.searchsorted(v, s, side="right") - 1
    hi = np.searchsorted(v, s, side="left")
    hp = v[np.minimum(hi, v.size - 1)]
    hm = v[np.maximum(lo, 0)]
    out = np.where(hp + hm <= 2.0 * s, hp, hm)
    out = np.where(lo < 0, v[0], out)
    out = np.where(hi == v.size, v[-1], out)
    return out


def pit_probability(family, params, s):
    """Exact P(F(Y|x) <= s): the largest grid value <= s, else 0."""
    _check_s(s)
    cdf = family.cdf_array(params)
    idx = int(np.searchsorted(cdf, s, side="right")) - 1
    if idx < 0:
        return 0.0
    return float(cdf[idx])
