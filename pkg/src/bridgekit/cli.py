"""Command line entry points: run, sweep, plotdata.

Failures exit nonzero with one machine-readable JSON record on stderr:
exit 2 for configuration problems, 1 for runtime failures (simulation
divergence, non-finite loss).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import parse_config
from .errors import BridgekitError, ConfigError, SimulationDiverged
from .runner import emit_plot_data, run_experiment, run_sweep

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridgekit",
        description="Schrodinger bridge solver between sample-defined "
                    "distributions")
    sub = parser.add_subparsers(dest="command", required=True)
    default_threads = os.cpu_count() or 1

    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("config", help="path to a JSON config file")
    run_p.add_argument("--threads", type=int, default=default_threads,
                       help="trajectory simulation threads "
                            "(default: available cores)")

    sweep_p = sub.add_parser("sweep",
                             help="run a config over a parameter grid")
    sweep_p.add_argument("config", help="path to a JSON config file")
    sweep_p.add_argument("--grid", required=True,
                         help='grid spec, e.g. "ipf.seed=0,1,2;ipf.n_traj='
                              '32,128,512"')
    sweep_p.add_argument("--base-dir", default=None,
                         help="directory for per-cell runs "
                              "(default: the config's output dir)")
    sweep_p.add_argument("--threads", type=int, default=default_threads,
                         help="trajectory simulation threads "
                              "(default: available cores)")

    plot_p = sub.add_parser("plotdata",
                            help="condense run artifacts into plot_data.csv")
    plot_p.add_argument("rundir", help="run directory holding metrics.json")
    return parser


def _error_record(exc: Exception) -> dict:
    record = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SimulationDiverged):
        record["step"] = exc.step
        record["magnitude"] = exc.magnitude
    return {"error": record}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = parse_config(args.config)
            print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
            metrics = run_experiment(cfg, threads=max(1, args.threads))
            print(json.dumps(
                {"metrics": str(os.path.join(cfg.output.dir, "metrics.json")),
                 "final_w1_forward": metrics["summary"]["final_w1_forward"],
                 "final_w1_backward": metrics["summary"]["final_w1_backward"]},
                sort_keys=True))
        elif args.command == "sweep":
            cfg = parse_config(args.config)
            rows = run_sweep(cfg, args.grid, base_dir=args.base_dir,
                             threads=max(1, args.threads))
            base = args.base_dir if args.base_dir is not None \
                else cfg.output.dir
            print(json.dumps(
                {"cells": len(rows),
                 "summary": str(os.path.join(base, "sweep_summary.csv"))},
                sort_keys=True))
        else:
            out = emit_plot_data(args.rundir)
            print(json.dumps({"plot_data": str(out)}, sort_keys=True))
    except ConfigError as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 2
    except BridgekitError as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 1
    return 0
