"""Regenerate the Monte Carlo pilot baseline used by the acceptance tests.

Runs the studies behind the closeness, ordering, separation, variance
scaling, and coefficient recovery checks and freezes their summary
numbers into tests/baselines/pilot.json.  Slow (tens of minutes on one
core); the committed baseline is the oracle, this script documents how
it was produced.

Usage: python3 tools/run_pilot.py [--out tests/baselines/pilot.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from discres import simlab, surrogate as surr
from discres.fitting import fit

MASTER_SEED = 20260823


def log(msg):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def median_of(result, label, key):
    return result.aggregates[label][key]["median"]


def closeness_pilot():
    """poisson-medium, n=2000, 100 reps: sup deviation and envelope."""
    result = simlab.run_study("poisson-medium", n=2000, reps=100,
                              seed=MASTER_SEED, methods=("surrogate",),
                              keep_curves=True)
    lo, hi = simlab.envelope(result.curves["true"])
    s = result.s_grid
    contains = (lo <= s) & (s <= hi)
    return {
        "median_sup_deviation": median_of(result, "true", "sup_deviation"),
        "envelope_coverage": float(np.mean(contains)),
        "n_failures": len(result.failures),
    }


def binary_ordering_pilot():
    out = {}
    for n in (100, 2000):
        result = simlab.run_study("binary", n=n, reps=100, seed=MASTER_SEED,
                                  methods=("surrogate", "deviance"))
        out[str(n)] = {
            "median_sup_deviation": median_of(result, "true", "sup_deviation"),
            "median_deviance_ks": median_of(result, "true", "deviance_ks"),
            "n_failures": len(result.failures),
        }
    return out


def separation_pilot():
    out = {}
    for name, wrong in (("nb-overdispersion", "poisson"),
                        ("poisson-missing-covariate", "missing")):
        result = simlab.run_study(name, n=500, reps=100, seed=MASTER_SEED,
                                  methods=("surrogate",))
        true_l2 = median_of(result, "true", "l2")
        wrong_l2 = median_of(result, wrong, "l2")
        out[name] = {
            "median_l2_true": true_l2,
            "median_l2_misspecified": wrong_l2,
            "ratio": wrong_l2 / true_l2,
            "n_failures": len(result.failures),
        }
        log(f"  {name}: ratio {wrong_l2 / true_l2:.2f}")
    return out


def variance_pilot():
    scenario = simlab.get_scenario("poisson-medium")
    rows = surr.variance_probe(scenario, 0.5, [2000, 8000],
                               range(MASTER_SEED, MASTER_SEED + 200))
    ratio = rows[0]["variance"] / rows[1]["variance"]
    return {"rows": rows, "ratio": ratio, "theory": 4.0 ** 0.8}


def recovery_pilot(reps=200):
    """Fraction of fitted coefficients within 3 SE of truth, per scenario."""
    out = {}
    for name, scenario in simlab.registered_scenarios().items():
        truth = np.concatenate(scenario.true_coefficients)
        hits = misses = 0
        bad_fits = se_failures = 0
        for i in range(reps):
            rng = simlab.replication_rng(MASTER_SEED, i)
            data = simlab.generate(scenario, scenario.n_default, rng)
            try:
                fitted = fit(scenario.true_spec, data)
            except Exception:
                bad_fits += 1
                continue
            coefs = np.concatenate(fitted.coefficients)
            if getattr(scenario.generator_family, "link", None) == "sqrt":
                # eta and -eta give the same mean under the sqrt link
                if coefs[1] < 0:
                    coefs = -coefs
            se = np.concatenate(fitted.standard_errors)
            if np.any(~np.isfinite(se)):
                se_failures += 1
                continue
            within = np.abs(coefs - truth) <= 3.0 * se
            hits += int(np.sum(within))
            misses += int(np.sum(~within))
        total = hits + misses
        out[name] = {
            "coefficient_coverage": hits / total if total else None,
            "fit_failures": bad_fits,
            "se_failures": se_failures,
            "reps": reps,
        }
        log(f"  {name}: coverage {out[name]['coefficient_coverage']:.4f}"
            f" failures {bad_fits}")
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="tests/baselines/pilot.json")
    args = parser.parse_args(argv)

    baseline = {"master_seed": MASTER_SEED}
    log("closeness pilot (poisson-medium, n=2000, 100 reps)")
    baseline["closeness"] = closeness_pilot()
    log(f"  {baseline['closeness']}")
    log("binary ordering pilot (n=100 vs n=2000, 100 reps each)")
    baseline["binary_ordering"] = binary_ordering_pilot()
    log(f"  {baseline['binary_ordering']}")
    log("separation pilot (n=500, 100 reps each)")
    baseline["separation"] = separation_pilot()
    log("variance scaling pilot (200 seeds, n=2000 vs 8000)")
    baseline["variance_scaling"] = variance_pilot()
    log(f"  ratio {baseline['variance_scaling']['ratio']:.3f}"
        f" vs theory {baseline['variance_scaling']['theory']:.3f}")
    log("coefficient recovery pilot (200 fits per scenario)")
    baseline["recovery"] = recovery_pilot()

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(baseline, indent=2, sort_keys=True) + "\n")
    log(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
