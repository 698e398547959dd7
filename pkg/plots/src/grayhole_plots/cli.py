"""Command line front end: render one figure from a JSON spec, or the
standard four figures from a sweep directory.

``plot --spec figure.json`` renders exactly the figure described by the
given JSON file.  ``plot --all <dir>`` expects the three summary CSVs a full
sweep campaign leaves behind (mobility, malicious, volume axes) and
renders the four standard figures from them.  Exit codes: 0 on success,
1 for any input problem (reported with the error class name), 2 for
unexpected failures.
"""

from __future__ import annotations

import argparse
import os
import sys

from .render import render
from .spec import FigureSpec, PlotInputError, load_spec

SUMMARY_FILES = {
    "mobility": "sweep_mobility_summary.csv",
    "malicious": "sweep_malicious_summary.csv",
    "volume": "sweep_volume_summary.csv",
}


def standard_figures(sweep_dir: str, out_dir: str) -> list[FigureSpec]:
    """The four standard figures, built from a sweep directory's summaries."""
    paths = {}
    for axis, fname in SUMMARY_FILES.items():
        path = os.path.join(sweep_dir, fname)
        if not os.path.isfile(path):
            raise PlotInputError(f"missing summary csv: {path}")
        paths[axis] = path
    return [
        FigureSpec(
            csv_path=paths["mobility"],
            x_column="axis_value",
            y_column="fpr_mean",
            output_path=os.path.join(out_dir, "fpr_vs_mobility.png"),
            series_label="false positive rate",
            title="False positives vs node mobility",
            x_label="maximum node speed (m/s)",
            y_label="false positive rate",
        ),
        FigureSpec(
            csv_path=paths["mobility"],
            x_column="axis_value",
            y_column="miss_rate_mean",
            output_path=os.path.join(out_dir, "miss_vs_mobility.png"),
            series_label="miss rate",
            title="Detection misses vs node mobility",
            x_label="maximum node speed (m/s)",
            y_label="miss rate",
        ),
        FigureSpec(
            csv_path=paths["malicious"],
            x_column="axis_value",
            y_column="pdr_mean",
            output_path=os.path.join(out_dir, "pdr_vs_malicious.png"),
            baseline_column="pdr_baseline_mean",
            series_label="detection on",
            baseline_label="detection off",
            title="Delivery ratio vs malicious population",
            x_label="malicious node count",
            y_label="packet delivery ratio",
        ),
        FigureSpec(
            csv_path=paths["volume"],
            x_column="axis_value",
            y_column="overhead_pct_mean",
            output_path=os.path.join(out_dir, "overhead_vs_volume.png"),
            baseline_column="overhead_baseline_pct_mean",
            series_label="detection on",
            baseline_label="detection off",
            title="Control overhead vs traffic volume",
            x_label="data packets per second per flow",
            y_label="control overhead (%)",
        ),
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grayhole-plots",
        description="Render figures from sweep CSVs.")
    sub = parser.add_subparsers(dest="command", required=True)
    plot = sub.add_parser("plot", help="render one or more figures")
    group = plot.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", metavar="FILE.json",
                       help="render the single figure this spec describes")
    group.add_argument("--all", metavar="SWEEP_DIR", dest="all_dir",
                       help="render the four standard figures from a "
                            "directory of sweep summary CSVs")
    plot.add_argument("--out", metavar="DIR", default=None,
                      help="output directory for --all "
                           "(default: the sweep directory itself)")
    return parser


def _run(args: argparse.Namespace) -> int:
    if args.spec is not None:
        image, sidecar = render(load_spec(args.spec))
        print(f"wrote {image}")
        print(f"wrote {sidecar}")
        return 0
    out_dir = args.out if args.out is not None else args.all_dir
    for spec in standard_figures(args.all_dir, out_dir):
        image, sidecar = render(spec)
        print(f"wrote {image}")
        print(f"wrote {sidecar}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except PlotInputError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"runtime failure [{type(exc).__name__}]: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
