"""Data generators and the Monte Carlo study runner.

Nine registered scenarios mirror the simulation designs the diagnostics
are meant for: three Poisson mean levels, a binary logistic design, two
missing-covariate designs, negative binomial overdispersion, a
zero-inflated Poisson, and a wrong-link design (square-root truth vs
log fit).  Unless a scenario overrides it, covariates are X1 ~ N(0,1)
and X2 ~ Bernoulli(0.7), with an intercept column.

Replication i of a study draws from an independent stream derived from
the master seed (SeedSequence spawn key), so results are bit-identical
for any worker count; aggregation always happens in replication-index
order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import families as fam
from . import residuals as res
from . import surrogate as surr
from ._errors import FittingError, UndefinedCurveError, UnsupportedFamilyError
from .fitting import Dataset, ModelSpec, fit

DEFAULT_SUP_RANGE = (0.2, 0.8)
DEFAULT_METHODS = ("surrogate", "cox-snell", "pearson", "deviance",
                   "randomized-quantile")

# Covariate laws: name -> n x 3 design [1, X1, X2].
_COVARIATE_LAWS = ("normal+dummy", "normal+normal")


def _draw_design(law, n, rng):
    x1 = rng.standard_normal(n)
    if law == "normal+dummy":
        x2 = (rng.random(n) < 0.7).astype(float)
    elif law == "normal+normal":
        x2 = rng.standard_normal(n)
    else:  # pragma: no cover
        raise ValueError(f"unknown covariate law {law!r}")
    return np.column_stack([np.ones(n), x1, x2])


@dataclass(frozen=True)
class Scenario:
    """A data-generating process with candidate model specs attached."""

    name: str
    generator_family: fam.Family
    true_coefficients: tuple          # one array per generator block
    generator_blocks: tuple           # design-column indices per block
    covariate_law: str
    fit_specs: dict                   # label -> ModelSpec
    n_default: int = 500
    description: str = ""

    @property
    def true_spec(self):
        return self.fit_specs["true"]


def _poisson_mean_scenario(name, beta0, description):
    coefs = (np.array([beta0, 2.0, 1.0]),)
    return Scenario(
        name=name,
        generator_family=fam.Poisson(),
        true_coefficients=coefs,
        generator_blocks=((0, 1, 2),),
        covariate_law="normal+dummy",
        fit_specs={"true": ModelSpec(fam.Poisson(), ((0, 1, 2),))},
        description=description,
    )


def _build_registry():
    scenarios = {}

    def add(s):
        scenarios[s.name] = s

    add(_poisson_mean_scenario("poisson-small", -2.0,
                               "Poisson log link, small mean (high discreteness)"))
    add(_poisson_mean_scenario("poisson-medium", 0.0,
                               "Poisson log link, medium mean"))
    add(_poisson_mean_scenario("poisson-large", 5.0,
                               "Poisson log link, large mean (near continuous)"))

    add(Scenario(
        name="binary",
        generator_family=fam.Bernoulli(),
        true_coefficients=(np.array([-2.0, 2.0, 1.0]),),
        generator_blocks=((0, 1, 2),),
        covariate_law="normal+dummy",
        fit_specs={"true": ModelSpec(fam.Bernoulli(), ((0, 1, 2),))},
        description="logistic regression, the most discrete case",
    ))

    for suffix, beta0 in (("", -2.0), ("-medium", 0.0)):
        add(Scenario(
            name=f"poisson-missing-covariate{suffix}",
            generator_family=fam.Poisson(),
            true_coefficients=(np.array([beta0, 2.0, 1.5]),),
            generator_blocks=((0, 1, 2),),
            covariate_law="normal+normal",
            fit_specs={
                "true": ModelSpec(fam.Poisson(), ((0, 1, 2),)),
                "missing": ModelSpec(fam.Poisson(), ((0, 1),)),
            },
            description="Poisson with X2 omitted in the misspecified fit",
        ))

    add(Scenario(
        name="nb-overdispersion",
        generator_family=fam.NegativeBinomial(size=2.0),
        true_coefficients=(np.array([-2.0, 2.0, 1.0]),),
        generator_blocks=((0, 1, 2),),
        covariate_law="normal+dummy",
        fit_specs={
            "true": ModelSpec(fam.NegativeBinomial(size=2.0), ((0, 1, 2),)),
            "poisson": ModelSpec(fam.Poisson(), ((0, 1, 2),)),
        },
        description="NB size 2 truth, Poisson misspecified fit",
    ))

    add(Scenario(
        name="zip-medium",
        generator_family=fam.ZeroInflatedPoisson(),
        true_coefficients=(np.array([-2.0, 2.0]), np.array([0.0, 2.0, 1.0])),
        generator_blocks=((0, 1), (0, 1, 2)),
        covariate_law="normal+dummy",
        fit_specs={
            "true": ModelSpec(fam.ZeroInflatedPoisson(), ((0, 1), (0, 1, 2))),
            "poisson": ModelSpec(fam.Poisson(), ((0, 1, 2),)),
        },
        description="zero-inflated Poisson truth, plain Poisson misfit",
    ))

    add(Scenario(
        name="wrong-link",
        generator_family=fam.Poisson(link="sqrt"),
        true_coefficients=(np.array([0.0, 1.0, 1.0]),),
        generator_blocks=((0, 1, 2),),
        covariate_law="normal+dummy",
        fit_specs={
            "true": ModelSpec(fam.Poisson(link="sqrt"), ((0, 1, 2),)),
            "log-link": ModelSpec(fam.Poisson(link="log"), ((0, 1, 2),)),
        },
        description="square-root link truth fitted with the log link",
    ))

    return scenarios


_REGISTRY = _build_registry()


def registered_scenarios():
    """The registered scenarios, keyed by name."""
    return dict(_REGISTRY)


def get_scenario(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; registered: "
            f"{', '.join(sorted(_REGISTRY))}") from None


def replication_rng(seed, index):
    """Independent stream for replication ``index`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def generate(scenario, n, rng):
    """Draw one Dataset from the scenario's data-generating process."""
    X = _draw_design(scenario.covariate_law, n, rng)
    family = scenario.generator_family
    etas = [X[:, cols] @ beta
            for cols, beta in zip(scenario.generator_blocks,
                                  scenario.true_coefficients)]
    eta_mat = np.column_stack(etas)
    y = np.empty(n, dtype=int)
    for i in range(n):
        y[i] = family.sample(family.params_from_eta(eta_mat[i]), rng)
    return Dataset(design=X, outcomes=y)


@dataclass(frozen=True)
class StudyResult:
    scenario: str
    n: int
    reps: int
    seed: int
    methods: tuple
    sup_range: tuple
    l2_range: tuple
    replications: list          # one dict per successful replication
    failures: list              # (rep index, fit label, message)
    aggregates: dict
    s_grid: np.ndarray = None
    curves: dict = None         # label -> reps x len(s_grid), NaN gaps

    def to_dict(self):
        out = {
            "scenario": self.scenario,
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
            "methods": list(self.methods),
            "sup_range": list(self.sup_range),
            "l2_range": list(self.l2_range),
            "replications": self.replications,
            "failures": [list(f) for f in self.failures],
            "aggregates": self.aggregates,
        }
        if self.s_grid is not None:
            out["s_grid"] = [float(s) for s in self.s_grid]
        if self.curves is not None:
            out["curves"] = {
                label: [[None if math.isnan(v) else float(v) for v in row]
                        for row in mat]
                for label, mat in self.curves.items()
            }
        return out


def _run_replication(scenario, n, seed, index, methods, sup_range, l2_range,
                     s_grid, kernel, keep_curves):
    rng = replication_rng(seed, index)
    data = generate(scenario, n, rng)
    rep = {"index": index, "fits": {}}
    curves = {}
    failures = []
    for label, spec in scenario.fit_specs.items():
        try:
            fitted = fit(spec, data)
        except FittingError as exc:
            failures.append((index, label, str(exc)))
            continue
        entry = {"loglik": fitted.loglik}
        pre = surr.observation_grids(fitted, data)
        if "surrogate" in methods:
            selection = surr.select_bandwidth(fitted, data, kernel,
                                              s_grid=s_grid, precomputed=pre)
            curve = surr.surrogate_curve(fitted, data, kernel,
                                         selection.bandwidth, s_grid,
                                         precomputed=pre)
            entry["bandwidth"] = selection.bandwidth
            try:
                entry["sup_deviation"] = surr.sup_deviation(curve, sup_range)
            except UndefinedCurveError:
                entry["sup_deviation"] = None
            try:
                entry["l2"] = surr.l2_distance(curve, l2_range)
            except UndefinedCurveError:
                entry["l2"] = None
            if keep_curves:
                curves[label] = curve.u_values
        if "cox-snell" in methods:
            values = res.cox_snell_values(fitted, data)
            entry["cox_snell_ks"] = res.ks_distance(
                res.ResidualVector("cox_snell", values, res.Reference.UNIFORM))
        if "pearson" in methods:
            entry["pearson_ks"] = res.ks_distance(res.pearson(fitted, data))
        if "deviance" in methods:
            try:
                entry["deviance_ks"] = res.ks_distance(res.deviance(fitted, data))
            except UnsupportedFamilyError:
                pass
        if "randomized-quantile" in methods:
            entry["randomized_quantile_ks"] = res.ks_distance(
                res.randomized_quantile(fitted, data, rng))
        rep["fits"][label] = entry
    return rep, curves, failures


def _aggregate(scenario, replications, sup_range):
    agg = {}
    for label in scenario.fit_specs:
        stats = {}
        for key in ("sup_deviation", "l2", "bandwidth", "cox_snell_ks",
                    "pearson_ks", "deviance_ks", "randomized_quantile_ks"):
            values = [r["fits"][label][key] for r in replications
                      if label in r["fits"]
                      and r["fits"][label].get(key) is not None]
            if values:
                arr = np.asarray(values, dtype=float)
                stats[key] = {"mean": float(np.mean(arr)),
                              "median": float(np.median(arr)),
                              "count": int(arr.size)}
        agg[label] = stats
    return agg


def run_study(scenario, n, reps, seed, *, methods=DEFAULT_METHODS,
              sup_range=DEFAULT_SUP_RANGE, l2_range=surr.DEFAULT_L2_RANGE,
              s_grid=None, kernel=surr.EPANECHNIKOV, keep_curves=False,
              workers=1):
    """Run a Monte Carlo study; deterministic given (scenario, n, reps, seed)."""
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if s_grid is None:
        s_grid = surr.default_s_grid()
    s_grid = np.asarray(s_grid, dtype=float)
    methods = tuple(methods)

    args = [(scenario, n, seed, i, methods, sup_range, l2_range, s_grid,
             kernel, keep_curves) for i in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replication_star, args))
    else:
        results = [_run_replication(*a) for a in args]

    replications, failures = [], []
    curve_rows = {label: [] for label in scenario.fit_specs} if keep_curves else None
    for rep, curves, fails in results:  # replication-index order
        replications.append(rep)
        failures.extend(fails)
        if keep_curves:
            for label, row in curves.items():
                curve_rows[label].append(row)

    curves = None
    if keep_curves:
        curves = {label: np.vstack(rows) for label, rows in curve_rows.items()
                  if rows}
    return StudyResult(
        scenario=scenario.name, n=n, reps=reps, seed=seed, methods=methods,
        sup_range=tuple(sup_range), l2_range=tuple(l2_range),
        replications=replications, failures=failures,
        aggregates=_aggregate(scenario, replications, sup_range),
        s_grid=s_grid, curves=curves,
    )


def _run_replication_star(args):
    return _run_replication(*args)


def envelope(curve_matrix, lo_pct=5.0, hi_pct=95.0):
    """Pointwise percentile band over replications, NaN-aware."""
    return (np.nanpercentile(curve_matrix, lo_pct, axis=0),
            np.nanpercentile(curve_matrix, hi_pct, axis=0))
