"""
Command-line entry point.

    mureassign run --scenario dual_stripe --tau -3 -1.5 0 1.5 --ues-per-cell 1 2 3 4
    mureassign show-config --config run.ini
    mureassign delta-mui --samples 20000

``run`` writes into the output directory:

* ``summary.csv``: one row per (scenario, ues_per_cell, tau)
* ``summary.json``: resolved configuration plus every summary
* ``plot_<metric>_<scenario>.csv``: x = ues_per_cell, one column pair
  (mean, ci95) per tau
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import Sequence

from .config import ConfigError, RunConfig, parse_config
from .engine import RunSummary, run_sweep

log = logging.getLogger("mureassign")

SCHEMA = "mureassign.results/1"

# output metric -> (summary stat, scale)
CSV_METRICS = {
    "deactivated_pct": ("deactivated_fraction", 100.0),
    "power_saved_pct": ("power_saved_fraction", 100.0),
    "se_gain_rue_tue": ("se_gain_rue_tue", 1.0),
    "mu_rb_fraction": ("mu_rb_fraction", 1.0),
}
CSV_HEADER = (
    ["scenario", "ues_per_cell", "tau", "n_iterations", "seed_base"]
    + [f"{m}_{s}" for m in CSV_METRICS for s in ("mean", "ci95")]
    + ["reassignment_prob_mean", "n_se_samples", "sched_violations"]
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else "%.6g" % x
    return str(x)


def _metric(s: RunSummary, name: str) -> tuple:
    stat, scale = CSV_METRICS[name]
    st = s.stats[stat]
    return st.mean * scale, st.ci95 * scale


def summary_csv(summaries: Sequence[RunSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in summaries:
        row = [s.scenario, s.ues_per_cell, float(s.tau), s.n_iterations, s.seed_base]
        for m in CSV_METRICS:
            row += list(_metric(s, m))
        row += [s.stats["reassignment_occurred"].mean, s.stats["se_gain_rue_tue"].n, s.sched_violations]
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def plot_tables(summaries: Sequence[RunSummary]) -> dict:
    """File name -> CSV text; one table per (metric, scenario)."""
    out = {}
    for scen in sorted({s.scenario for s in summaries}):
        rows = [s for s in summaries if s.scenario == scen]
        taus = sorted({s.tau for s in rows})
        upcs = sorted({s.ues_per_cell for s in rows})
        index = {(s.ues_per_cell, s.tau): s for s in rows}
        for m in CSV_METRICS:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["ues_per_cell"] + [f"tau={_fmt(float(t))}_{k}" for t in taus for k in ("mean", "ci95")])
            for u in upcs:
                row = [u]
                for t in taus:
                    s = index.get((u, t))
                    row += list(_metric(s, m)) if s else [math.nan, math.nan]
                w.writerow([_fmt(v) for v in row])
            out[f"plot_{m}_{scen}.csv"] = buf.getvalue()
    return out


def emit_results(summaries: Sequence[RunSummary], run: RunConfig, output_dir: str,
                 failed: Sequence = ()) -> list[str]:
    """Write CSV, JSON and plot-data files; returns the paths written."""
    if not summaries:
        raise ValueError("no summaries to write")
    os.makedirs(output_dir, exist_ok=True)
    files = {"summary.csv": summary_csv(summaries)}
    files.update(plot_tables(summaries))
    doc = {
        "schema": SCHEMA,
        "config": run.to_dict(),
        "failed_grid_points": [dict(p) for p in failed],
        "summaries": [s.to_dict() for s in summaries],
    }
    files["summary.json"] = json.dumps(doc, indent=2, sort_keys=True, default=_json_default,
                                       allow_nan=True) + "\n"
    written = []
    for name, text in files.items():
        path = os.path.join(output_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(type(o).__name__)


# -- argument handling -------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI configuration document")
    p.add_argument("--scenario", choices=["dual_stripe", "outdoor"])
    p.add_argument("--dr", type=float, help="indoor HeNB deployment ratio")
    p.add_argument("--n-cells", type=int, help="outdoor pico count")
    p.add_argument("--tau", nargs="+", type=float, metavar="T", help="reassignment thresholds, bits/RB")
    p.add_argument("--ues-per-cell", nargs="+", type=int, metavar="N")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=["exact", "greedy"])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta-mui", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--overhead", dest="overhead", action="store_true", default=None,
                   help="scale throughput by the feedback-overhead factor")
    p.add_argument("--no-overhead", dest="overhead", action="store_false")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any document key")


def _flag_overrides(args) -> dict:
    ov = {
        "scenario.name": args.scenario,
        "scenario.dr": args.dr,
        "scenario.n_cells": args.n_cells,
        "sweep.tau_list": args.tau,
        "sweep.ues_per_cell": args.ues_per_cell,
        "sweep.n_iterations": args.iterations,
        "sweep.seed": args.seed,
        "sweep.workers": args.workers,
        "sweep.output_dir": args.output_dir,
        "reassignment.solver": args.solver,
        "mimo.epsilon": args.epsilon,
        "mimo.delta_mui": args.delta_mui,
        "engine.feedback_overhead": args.overhead,
    }
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"{item}: expected SECTION.KEY=VALUE")
        ov[key.strip()] = value
    return {k: v for k, v in ov.items() if v is not None}


def load_run_config(args) -> RunConfig:
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, _flag_overrides(args))


def cmd_run(args) -> int:
    run = load_run_config(args)
    grid = run.grid()
    summaries, failed = [], []
    # one engine call per UE count so a failing point does not sink the rest
    for upc in run.ues_per_cell_list:
        part = [g for g in grid if g.ues_per_cell == upc]
        try:
            summaries += run_sweep(part, run.n_iterations, run.seed, run.workers)
        except Exception as exc:  # reported, exit code reflects it
            log.error("grid point ues_per_cell=%d failed: %s", upc, exc)
            failed += [{"ues_per_cell": upc, "tau": g.tau, "error": str(exc)} for g in part]
    if summaries:
        for path in emit_results(summaries, run, run.output_dir, failed):
            log.info("wrote %s", path)
    return 0 if not failed else 1


def cmd_show_config(args) -> int:
    run = load_run_config(args)
    json.dump(run.to_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_delta_mui(args) -> int:
    from .link import estimate_delta_mui

    d = estimate_delta_mui(args.samples, args.epsilon, args.noise_var, args.seed)
    print("%.6g" % d)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mureassign",
                                description="MU-MIMO small-cell reassignment simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a tau x UEs-per-cell sweep and write results")
    _add_config_flags(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("show-config", help="print the resolved configuration as JSON")
    _add_config_flags(c)
    c.set_defaults(func=cmd_show_config)

    d = sub.add_parser("delta-mui", help="Monte Carlo estimate of the MU interference factor")
    d.add_argument("--samples", type=int, default=20000)
    d.add_argument("--epsilon", type=float, default=0.1)
    d.add_argument("--noise-var", type=float, default=0.1)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_delta_mui)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
