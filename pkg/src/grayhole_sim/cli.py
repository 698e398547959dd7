"""Command-line front end.

Three subcommands:

* ``run``     one scenario; metrics on stdout, optional trace + metrics
              files under --out
* ``sweep``   a parameter sweep; raw and summary CSVs under --out
* ``metrics`` recompute metrics from a saved trace file

Exit codes: 0 success, 1 configuration or usage error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .metrics import compute_metrics_file
from .runner import SWEEP_AXES, run_scenario, sweep
from .scenario import ConfigError, ScenarioConfig, load_config


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors instead of
    exiting with its own status code."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="grayhole-sim",
                     description="MANET gray-hole attack and detection "
                                 "simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("--config", help="scenario config file "
                                        "(key = value lines)")
    run_p.add_argument("--seed", type=int, help="override sim.seed")
    run_p.add_argument("--out", help="directory for trace.txt and "
                                     "metrics.txt")

    sweep_p = sub.add_parser("sweep", help="run a parameter sweep")
    sweep_p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated axis values")
    sweep_p.add_argument("--repeats", type=int, default=1)
    sweep_p.add_argument("--config", help="base scenario config file")
    sweep_p.add_argument("--seed", type=int, help="override sim.seed")
    sweep_p.add_argument("--out", required=True,
                         help="directory for sweep CSVs")

    met_p = sub.add_parser("metrics", help="recompute metrics from a "
                                           "trace file")
    met_p.add_argument("--trace", required=True)
    return parser


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    cfg.validate()
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    trace_path = None
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        trace_path = os.path.join(args.out, "trace.txt")
    metrics = run_scenario(cfg, trace_path)
    lines = metrics.as_lines()
    if args.out:
        with open(os.path.join(args.out, "metrics.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    try:
        values = [float(tok) for tok in args.values.split(",") if tok]
    except ValueError as exc:
        raise ConfigError(f"bad --values: {exc}") from exc
    raw, summary = sweep(cfg, args.axis, values, args.repeats, args.out)
    print(raw)
    print(summary)
    return 0


def _cmd_metrics(args) -> int:
    try:
        metrics = compute_metrics_file(args.trace)
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc}") from exc
    print("\n".join(metrics.as_lines()))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_metrics(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
