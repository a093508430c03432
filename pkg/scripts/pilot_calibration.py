"""Pilot runs used to calibrate the statistical acceptance thresholds.

The pilots use master seeds disjoint from the acceptance suite so the
thresholds are not tuned on the data they later judge. Output is JSON on
stdout; the frozen values and their provenance live in
``tests/acceptance_fixtures.py``.
"""

from __future__ import annotations

import argparse
import json
import time
import warnings

from ztising.experiments import ExperimentConfig, recurrence_summary, run_ensemble
from ztising.lattice import LatticeGeometry

PILOT_SEEDS = {"coarsening": 90001, "wrapping": 90002, "recurrence": 90003}


def coarsening(n):
    cfg = ExperimentConfig(LatticeGeometry(256, 256), probe_times=(0, 1, 2, 4, 8, 16, 32, 64),
                           n_replicas=n, L_values=(2,), master_seed=PILOT_SEEDS["coarsening"])
    res = run_ensemble(cfg)
    keep = ("wall_density", "corner_density", "window_A", "window_C+", "window_C-",
            "median_origin_cluster", "persistence", "wrapping")
    return {s.observable + ("" if s.L is None else f"@L{s.L}") + f"@t{s.t:g}": [s.estimate, s.stderr]
            for s in res.stats if s.observable in keep}


def wrapping(n):
    cfg = ExperimentConfig(LatticeGeometry(128, 128), probe_times=(0, 1), n_replicas=n,
                           observables={"clusters"}, master_seed=PILOT_SEEDS["wrapping"])
    res = run_ensemble(cfg)
    return {f"t{s.t:g}": [s.estimate, s.n] for s in res.stats if s.observable == "wrapping"}


def recurrence(n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = ExperimentConfig(LatticeGeometry(64, 64), probe_times=(512,), n_replicas=n,
                               observables={"recurrence"}, recurrence_L=2,
                               master_seed=PILOT_SEEDS["recurrence"])
    summary = recurrence_summary(run_ensemble(cfg).recurrence)
    summary.pop("per_replica")
    return summary


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicas", type=int, default=200)
    ap.add_argument("--wrap-replicas", type=int, default=500)
    ap.add_argument("--only", choices=["coarsening", "wrapping", "recurrence"])
    args = ap.parse_args()
    out = {}
    for name, fn, n in (("coarsening", coarsening, args.replicas), ("wrapping", wrapping, args.wrap_replicas),
                        ("recurrence", recurrence, args.replicas)):
        if args.only and args.only != name:
            continue
        t0 = time.perf_counter()
        out[name] = fn(n)
        out[name + "_seconds"] = round(time.perf_counter() - t0, 1)
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
