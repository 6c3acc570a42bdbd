"""Command-line front end: fit, diagnose, compare, simulate.

Every output artifact embeds the resolved run configuration and the
library version, and contains no timestamps, so re-running a command
with the same inputs and seed reproduces the file byte for byte.
Curve data is emitted both as JSON and CSV with identical numbers.

Exit codes: 0 success, 2 usage, 3 data/format, 4 convergence, 5 internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from . import families as fam
from . import residuals as res
from . import simlab
from . import surrogate as surr
from ._errors import DataFormatError, DiscresError, FittingError
from .fitting import Dataset, FittedModel, ModelSpec, fit

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
EXIT_INTERNAL = 5

INTERCEPT = "(Intercept)"


# ---------------------------------------------------------------------------
# CSV ingestion


def read_csv_columns(path):
    """Parse a headered CSV of numeric columns; errors carry row/column context."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataFormatError(f"{path}: file is empty") from None
            header = [h.strip() for h in header]
            columns = {name: [] for name in header}
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(header):
                    raise DataFormatError(
                        f"{path}:{lineno}: expected {len(header)} fields, "
                        f"got {len(row)}")
                for name, cell in zip(header, row):
                    try:
                        columns[name].append(float(cell))
                    except ValueError:
                        raise DataFormatError(
                            f"{path}:{lineno}: column {name!r}: "
                            f"non-numeric value {cell.strip()!r}") from None
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    return {name: np.asarray(vals) for name, vals in columns.items()}


def build_dataset(columns, outcome, block_names):
    """Assemble a Dataset from named columns; returns (dataset, block indices)."""
    if outcome not in columns:
        raise DataFormatError(
            f"outcome column {outcome!r} not found; available: "
            f"{', '.join(columns)}")
    ordered = [INTERCEPT]
    for names in block_names:
        for name in names:
            if name == INTERCEPT:
                continue
            if name not in columns:
                raise DataFormatError(
                    f"covariate column {name!r} not found; available: "
                    f"{', '.join(columns)}")
            if name not in ordered:
                ordered.append(name)
    n = columns[outcome].size
    design = np.ones((n, len(ordered)))
    for j, name in enumerate(ordered[1:], start=1):
        design[:, j] = columns[name]
    y = columns[outcome]
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise DataFormatError(
            f"outcome column {outcome!r} must contain non-negative integers")
    blocks = tuple(tuple(ordered.index(name) for name in names)
                   for names in block_names)
    data = Dataset(design=design, outcomes=y.astype(int))
    return data, blocks, ordered


def parse_formula(formula, family):
    """Per-block covariate names from a formula string.

    Single-block families take ``x1+x2``.  Multi-block families take
    ``block:x1+x2;block:x1`` with block names matching the family's
    (e.g. ``zero:x1;count:x1+x2``).  An intercept is always included.
    """
    blocks = {}
    if ":" in formula:
        for part in formula.split(";"):
            part = part.strip()
            if not part:
                continue
            if ":" not in part:
                raise DataFormatError(
                    f"formula part {part!r} is missing a 'block:' prefix")
            name, terms = part.split(":", 1)
            blocks[name.strip()] = terms
    else:
        if len(family.block_names) != 1:
            raise DataFormatError(
                f"{family.kind} has blocks {family.block_names}; use the "
                f"'block:terms;block:terms' formula syntax")
        blocks[family.block_names[0]] = formula
    out = []
    for bname in family.block_names:
        if bname not in blocks:
            raise DataFormatError(
                f"formula is missing the {bname!r} block for {family.kind}")
        terms = [t.strip() for t in blocks[bname].split("+") if t.strip()]
        terms = [t for t in terms if t != "1"]
        out.append([INTERCEPT] + terms)
    return out


# ---------------------------------------------------------------------------
# Artifacts


def _provenance(args, command):
    # workers only schedules the computation, so it stays out of the
    # provenance and the same seed gives byte-identical files at any count
    skip = ("func", "workers")
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {"command": command, "config": cfg, "discres_version": __version__}


def fitted_to_artifact(fitted, block_names, outcome, provenance):
    return {
        "provenance": provenance,
        "model": {
            "family": fitted.spec.family.kind,
            "link": getattr(fitted.spec.family, "link", None),
            "size": getattr(fitted.spec.family, "size", None),
            "outcome": outcome,
            "blocks": [
                {"name": bname,
                 "columns": list(cols),
                 "coefficients": [float(c) for c in coef],
                 "standard_errors": [float(s) for s in se]}
                for bname, cols, coef, se in zip(
                    fitted.spec.family.block_names, block_names,
                    fitted.coefficients, fitted.standard_errors)
            ],
            "loglik": fitted.loglik,
            "converged": fitted.converged,
            "iterations": fitted.iterations,
            "auxiliary": {k: float(v) for k, v in fitted.auxiliary.items()},
        },
    }


def fitted_from_artifact(artifact, columns):
    """Rebuild a FittedModel against a freshly loaded dataset."""
    model = artifact["model"]
    size = model.get("auxiliary", {}).get("size", model.get("size"))
    family = fam.make_family(model["family"], link=model.get("link"), size=size)
    block_names = [b["columns"] for b in model["blocks"]]
    data, blocks, ordered = build_dataset(columns, model["outcome"], block_names)
    spec = ModelSpec(family, blocks)
    fitted = FittedModel(
        spec=spec,
        coefficients=tuple(np.asarray(b["coefficients"]) for b in model["blocks"]),
        loglik=model["loglik"],
        standard_errors=tuple(np.asarray(b["standard_errors"])
                              for b in model["blocks"]),
        converged=model["converged"],
        iterations=model["iterations"],
        auxiliary=dict(model.get("auxiliary", {})),
    )
    return fitted, data


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_curve_csv(path, curve, provenance):
    with open(path, "w", newline="") as fh:
        for line in json.dumps(provenance, sort_keys=True).splitlines():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["s", "u", "effective_n", "defined"])
        for rec in curve.to_records():
            writer.writerow([
                repr(rec["s"]),
                "" if rec["u"] is None else repr(rec["u"]),
                repr(rec["effective_n"]),
                int(rec["defined"]),
            ])


# ---------------------------------------------------------------------------
# Commands


def cmd_fit(args):
    family = fam.make_family(args.family, link=args.link, size=args.size)
    block_names = parse_formula(args.formula, family)
    columns = read_csv_columns(args.data)
    data, blocks, _ = build_dataset(columns, args.outcome, block_names)
    spec = ModelSpec(family, blocks)
    fitted = fit(spec, data)
    artifact = fitted_to_artifact(fitted, block_names, args.outcome,
                                  _provenance(args, "fit"))
    write_json(args.out, artifact)
    _print_fit_table(artifact["model"])
    print(f"loglik {fitted.loglik:.6f}  converged {fitted.converged}  "
          f"iterations {fitted.iterations}")
    print(f"wrote {args.out}")
    return 0


def _print_fit_table(model):
    print(f"{'Block':<8}{'Variable':<20}{'Coef.':>12}{'s.e.':>12}")
    for block in model["blocks"]:
        for name, coef, se in zip(block["columns"], block["coefficients"],
                                  block["standard_errors"]):
            print(f"{block['name'].capitalize():<8}{name:<20}"
                  f"{coef:>12.4f}{se:>12.4f}")
    if model["auxiliary"]:
        for key, value in model["auxiliary"].items():
            print(f"{'':8}{key:<20}{value:>12.4f}")


def _diagnose_one(fitted, data, args):
    kernel = surr.get_kernel(args.kernel)
    s_lo, s_hi, s_count = args.s_grid
    s_grid = surr.default_s_grid(s_lo, s_hi, int(s_count))
    pre = surr.observation_grids(fitted, data)
    if args.bandwidth is not None:
        bandwidth = args.bandwidth
    else:
        bandwidth = surr.select_bandwidth(fitted, data, kernel, s_grid=s_grid,
                                          precomputed=pre).bandwidth
    curve = surr.surrogate_curve(fitted, data, kernel, bandwidth, s_grid,
                                 precomputed=pre)
    l2 = surr.l2_distance(curve, tuple(args.s_range))
    return curve, bandwidth, l2


def cmd_diagnose(args):
    with open(args.fitted) as fh:
        artifact = json.load(fh)
    columns = read_csv_columns(args.data)
    fitted, data = fitted_from_artifact(artifact, columns)
    curve, bandwidth, l2 = _diagnose_one(fitted, data, args)
    provenance = _provenance(args, "diagnose")

    summary = {
        "provenance": provenance,
        "bandwidth": bandwidth,
        "l2_range": list(args.s_range),
        "l2": l2,
        "l2_x1000": 1000.0 * l2,
        "curve": curve.to_records(),
    }
    rng = np.random.default_rng(args.seed)
    for kind in args.residuals:
        if kind == "pearson":
            vec = res.pearson(fitted, data)
        elif kind == "deviance":
            vec = res.deviance(fitted, data)
        elif kind == "randomized-quantile":
            vec = res.randomized_quantile(fitted, data, rng)
        elif kind == "cox-snell":
            vec = res.ResidualVector("cox_snell",
                                     res.cox_snell_values(fitted, data),
                                     res.Reference.UNIFORM)
        else:
            raise DataFormatError(f"unknown residual kind {kind!r}")
        pp = res.pp_curve(vec)
        summary.setdefault("pp_curves", {})[kind] = {
            "theoretical": [float(v) for v in pp.theoretical],
            "empirical": [float(v) for v in pp.empirical],
            "ks": res.ks_distance(vec),
        }

    write_json(f"{args.out}.json", summary)
    write_curve_csv(f"{args.out}.csv", curve, provenance)
    print(f"bandwidth {bandwidth:.6g}")
    print(f"L2 x 1000 over [{args.s_range[0]}, {args.s_range[1]}]: "
          f"{1000.0 * l2:.3f}")
    print(f"wrote {args.out}.json and {args.out}.csv")
    return 0


def cmd_compare(args):
    columns = read_csv_columns(args.data)
    rows = []
    for path in args.fitted:
        with open(path) as fh:
            artifact = json.load(fh)
        fitted, data = fitted_from_artifact(artifact, columns)
        curve, bandwidth, l2 = _diagnose_one(fitted, data, args)
        rows.append({"fitted": path, "family": fitted.spec.family.kind,
                     "bandwidth": bandwidth, "l2": l2,
                     "l2_x1000": 1000.0 * l2})
    payload = {"provenance": _provenance(args, "compare"), "models": rows}
    if args.out:
        write_json(args.out, payload)
    header = "  ".join(f"{r['family']:>12}" for r in rows)
    values = "  ".join(f"{r['l2_x1000']:>12.3f}" for r in rows)
    print("L2 norm distances from the diagonal (x 1000)")
    print(header)
    print(values)
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_simulate(args):
    if args.scenario_file:
        scenario = _scenario_from_file(args.scenario_file)
    else:
        try:
            scenario = simlab.get_scenario(args.scenario)
        except KeyError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_USAGE
    result = simlab.run_study(
        scenario, n=args.n, reps=args.reps, seed=args.seed,
        workers=args.workers, keep_curves=args.dump_curves)
    payload = {"provenance": _provenance(args, "simulate"),
               "result": result.to_dict()}
    write_json(args.out, payload)
    if args.dump_curves and result.curves:
        base, _ = os.path.splitext(args.out)
        for label, mat in result.curves.items():
            path = f"{base}_{label}_curves.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["rep"] + [repr(float(s)) for s in result.s_grid])
                for i, row in enumerate(mat):
                    writer.writerow([i] + ["" if np.isnan(v) else repr(float(v))
                                           for v in row])
            print(f"wrote {path}")
    n_fail = len(result.failures)
    print(f"scenario {result.scenario}: {result.reps} replications, "
          f"{n_fail} fit failure(s)")
    for label, stats in result.aggregates.items():
        parts = [f"{k} median {v['median']:.4f}" for k, v in stats.items()
                 if k in ("sup_deviation", "l2")]
        if parts:
            print(f"  {label}: " + ", ".join(parts))
    print(f"wrote {args.out}")
    return 0


def _scenario_from_file(path):
    """User-supplied scenario: family, coefficients, covariate law, fits."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read scenario file {path}: {exc}") from exc
    family = fam.make_family(raw["family"], link=raw.get("link"),
                             size=raw.get("size"))
    coefs = tuple(np.asarray(block, dtype=float)
                  for block in raw["coefficients"])
    blocks = tuple(tuple(b) for b in raw["blocks"])
    fit_specs = {}
    for label, spec_raw in raw["fit_specs"].items():
        f = fam.make_family(spec_raw["family"], link=spec_raw.get("link"),
                            size=spec_raw.get("size"))
        fit_specs[label] = ModelSpec(f, tuple(tuple(b)
                                              for b in spec_raw["blocks"]))
    return simlab.Scenario(
        name=raw.get("name", os.path.basename(path)),
        generator_family=family,
        true_coefficients=coefs,
        generator_blocks=blocks,
        covariate_law=raw.get("covariate_law", "normal+dummy"),
        fit_specs=fit_specs,
        description=raw.get("description", "user-supplied scenario"),
    )


# ---------------------------------------------------------------------------
# Parser


def _default_seed():
    env = os.environ.get("DISCRES_SEED")
    return int(env) if env else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="discres",
        description="Diagnostics for regression models with discrete outcomes")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model to a CSV dataset")
    p_fit.add_argument("data", help="CSV file with a header row")
    p_fit.add_argument("--family", required=True,
                       choices=["poisson", "negbin", "bernoulli", "zip", "zoip"])
    p_fit.add_argument("--link", default=None,
                       choices=["log", "logit", "sqrt", "identity"])
    p_fit.add_argument("--size", type=float, default=None,
                       help="initial NB size (estimated by profiling)")
    p_fit.add_argument("--formula", required=True,
                       help="covariates, e.g. 'x1+x2' or 'zero:x1;count:x1+x2'")
    p_fit.add_argument("--outcome", required=True, help="outcome column name")
    p_fit.add_argument("--out", required=True, help="output JSON artifact")
    p_fit.set_defaults(func=cmd_fit)

    def add_diagnose_flags(p):
        p.add_argument("--kernel", default="epanechnikov",
                       choices=["epanechnikov", "quartic"])
        p.add_argument("--bandwidth", type=float, default=None,
                       help="fixed bandwidth (default: data-driven selection)")
        p.add_argument("--s-grid", nargs=3, type=float,
                       default=[surr.DEFAULT_S_LO, surr.DEFAULT_S_HI,
                                surr.DEFAULT_S_COUNT],
                       metavar=("LO", "HI", "COUNT"))
        p.add_argument("--s-range", nargs=2, type=float,
                       default=list(surr.DEFAULT_L2_RANGE),
                       metavar=("LO", "HI"), help="L2 integration range")
        p.add_argument("--seed", type=int, default=_default_seed())

    p_diag = sub.add_parser("diagnose", help="diagnostic curves for one fit")
    p_diag.add_argument("--fitted", required=True, help="fit artifact JSON")
    p_diag.add_argument("--data", required=True, help="CSV dataset")
    add_diagnose_flags(p_diag)
    p_diag.add_argument("--residuals", nargs="*", default=[],
                        choices=["pearson", "deviance", "randomized-quantile",
                                 "cox-snell"])
    p_diag.add_argument("--out", required=True,
                        help="output prefix (writes .json and .csv)")
    p_diag.set_defaults(func=cmd_diagnose)

    p_cmp = sub.add_parser("compare",
                           help="L2 table for several fits on one dataset")
    p_cmp.add_argument("--fitted", required=True, nargs="+",
                       help="fit artifact JSON files")
    p_cmp.add_argument("--data", required=True, help="CSV dataset")
    add_diagnose_flags(p_cmp)
    p_cmp.add_argument("--out", default=None, help="optional output JSON")
    p_cmp.set_defaults(func=cmd_compare)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    p_sim.add_argument("scenario", nargs="?", default=None,
                       help="registered scenario name")
    p_sim.add_argument("--scenario-file", default=None,
                       help="JSON file describing a custom scenario")
    p_sim.add_argument("--n", type=int, default=500)
    p_sim.add_argument("--reps", type=int, default=100)
    p_sim.add_argument("--seed", type=int, default=_default_seed())
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--dump-curves", action="store_true",
                       help="also write per-replication curve CSVs")
    p_sim.add_argument("--out", required=True, help="output JSON")
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and not (args.scenario or args.scenario_file):
        parser.error("simulate needs a scenario name or --scenario-file")
    try:
        return args.func(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FittingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DiscresError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - safety net
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
