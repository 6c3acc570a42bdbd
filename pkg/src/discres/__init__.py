"""Diagnostics for regression models with discrete outcomes.

The centerpiece is the surrogate empirical residual distribution
function: a kernel-weighted alternative to the Cox-Snell empirical
residual distribution function that stays close to the identity under
a correctly specified model even for highly discrete outcomes.
"""

from ._errors import (
    BandwidthSelectionError,
    DataFormatError,
    DegenerateDistributionError,
    DiscresError,
    FittingError,
    NonConvergenceError,
    ParameterDomainError,
    SeparationError,
    SingularDesignError,
    UndefinedCurveError,
    UnsupportedFamilyError,
)
from .families import (
    Bernoulli,
    Family,
    NegativeBinomial,
    Poisson,
    ZeroInflatedPoisson,
    ZeroOneInflatedPoisson,
    make_family,
)
from .fitting import Dataset, FittedModel, ModelSpec, fit, loglik, predict_cdf
from .grid import (
    DistributionGrid,
    NearestGridPoint,
    build_grid,
    h_minus,
    h_nearest,
    h_plus,
    pit_probability,
)
from .residuals import (
    PPCurve,
    ResidualVector,
    cox_snell_ecdf,
    cox_snell_values,
    deviance,
    ks_distance,
    pearson,
    pp_curve,
    randomized_quantile,
)
from .simlab import (
    Scenario,
    StudyResult,
    generate,
    get_scenario,
    registered_scenarios,
    replication_rng,
    run_study,
)
from .surrogate import (
    EPANECHNIKOV,
    QUARTIC,
    BandwidthSelection,
    Kernel,
    SurrogateCurve,
    default_s_grid,
    get_kernel,
    l2_distance,
    select_bandwidth,
    sup_deviation,
    surrogate_curve,
    u_hat,
    variance_probe,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
