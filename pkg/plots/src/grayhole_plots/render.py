"""CSV aggregation and chart rendering.

The renderer consumes the sweep CSV schema only (a header row, optional
``#`` comment lines, one row per run or per summary point).  For every
(series, x) group it computes the mean and the sample standard deviation
of the y column — or, when the input is already aggregated and carries a
matching ``*_std`` column, takes those numbers verbatim — draws a line
chart with error bars, and writes the exact plotted points to a CSV
sidecar next to the image.  The sidecar, not the image bytes, is the
determinism artifact: rasterization may differ across backends, the
numbers may not.
"""

from __future__ import annotations

import csv
import math
import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .spec import FigureSpec, PlotInputError

SIDECAR_COLUMNS = ["series", "x", "y", "err", "n"]

_MISSING = object()


def read_rows(csv_path: str) -> list[dict]:
    """Sweep-schema rows: skips comment lines, rejects ragged rows."""
    try:
        with open(csv_path, "r", encoding="utf-8", newline="") as fh:
            lines = [ln for ln in fh if not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise PlotInputError(f"cannot read csv {csv_path}: {exc}") from exc
    reader = csv.DictReader(lines, restkey=None, restval=_MISSING)
    if reader.fieldnames is None:
        raise PlotInputError(f"{csv_path}: no header row")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if None in row:
            raise PlotInputError(
                f"{csv_path} line {lineno}: more fields than the header")
        if _MISSING in row.values():
            raise PlotInputError(
                f"{csv_path} line {lineno}: fewer fields than the header")
        rows.append(row)
    if not rows:
        raise PlotInputError(f"{csv_path}: no data rows")
    return rows


def _need_column(rows: list[dict], column: str, csv_path: str) -> None:
    if column not in rows[0]:
        raise PlotInputError(f"{csv_path}: no column {column!r}")


def _to_float(raw: str, column: str, csv_path: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise PlotInputError(
            f"{csv_path}: non-numeric value {raw!r} in column "
            f"{column!r}") from exc


def _sample_std(values: list[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    m = sum(values) / n
    return math.sqrt(sum((v - m) ** 2 for v in values) / (n - 1))


def _std_column_for(y_column: str) -> str:
    stem = y_column[:-5] if y_column.endswith("_mean") else y_column
    return f"{stem}_std"


def _series_sort_key(name: str) -> tuple:
    """Numeric series names sort by value, everything else after, by text."""
    try:
        return (0, float(name), "")
    except ValueError:
        return (1, 0.0, name)


def aggregate(rows: list[dict], x_column: str, y_column: str,
              series_column: Optional[str], csv_path: str,
              series_label: str = "") -> list[tuple]:
    """(series, x, mean, err, n) tuples, sorted by (series, x).

    ``err`` is the sample standard deviation across the group's rows,
    unless the rows are pre-aggregated (group size 1 and a matching
    ``*_std`` column exists), in which case that column is trusted.
    """
    _need_column(rows, x_column, csv_path)
    _need_column(rows, y_column, csv_path)
    if series_column is not None:
        _need_column(rows, series_column, csv_path)
    std_col = _std_column_for(y_column)
    have_std_col = std_col in rows[0] and std_col != y_column

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        series = row[series_column] if series_column else series_label
        x = _to_float(row[x_column], x_column, csv_path)
        groups.setdefault((str(series), x), []).append(row)

    points = []
    order = sorted(groups.items(),
                   key=lambda kv: (_series_sort_key(kv[0][0]), kv[0][1]))
    for (series, x), grp in order:
        ys = [_to_float(r[y_column], y_column, csv_path) for r in grp]
        y = sum(ys) / len(ys)
        if len(grp) == 1 and have_std_col:
            err = _to_float(grp[0][std_col], std_col, csv_path)
        else:
            err = _sample_std(ys)
        points.append((series, x, y, err, len(grp)))
    return points


def sidecar_path(output_path: str) -> str:
    root, _ = os.path.splitext(output_path)
    return root + ".points.csv"


def _write_sidecar(path: str, points: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SIDECAR_COLUMNS)
        for series, x, y, err, n in points:
            writer.writerow([series, f"{x:g}", f"{y:.6f}",
                             f"{err:.6f}", n])


def render(spec: FigureSpec) -> tuple[str, str]:
    """Draw one figure; returns (image_path, sidecar_path)."""
    spec.validate()
    rows = read_rows(spec.csv_path)
    points = aggregate(rows, spec.x_column, spec.y_column,
                       spec.series_column, spec.csv_path,
                       series_label=spec.series_label or spec.y_column)
    if spec.baseline_column:
        points += aggregate(rows, spec.x_column, spec.baseline_column,
                            None, spec.csv_path,
                            series_label=spec.baseline_label)

    out_dir = os.path.dirname(os.path.abspath(spec.output_path))
    os.makedirs(out_dir, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    series_names = sorted({p[0] for p in points}, key=_series_sort_key)
    for name in series_names:
        line = [(x, y, err) for s, x, y, err, _ in points if s == name]
        line.sort()
        xs = [p[0] for p in line]
        ys = [p[1] for p in line]
        errs = [p[2] for p in line]
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3,
                    label=str(name))
    ax.set_xlabel(spec.x_label or spec.x_column)
    ax.set_ylabel(spec.y_label or spec.y_column)
    if spec.title:
        ax.set_title(spec.title)
    if len(series_names) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.output_path)
    plt.close(fig)

    side = sidecar_path(spec.output_path)
    _write_sidecar(side, points)
    return spec.output_path, side
