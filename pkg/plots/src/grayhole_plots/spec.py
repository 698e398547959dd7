"""Figure descriptions and the named input error.

A :class:`FigureSpec` names one chart: which CSV to read, which columns
give the x values, the y values, and (optionally) the series split, and
where the image goes.  FigureSpecs can be loaded from small JSON files
so a figure set is reviewable data, not code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Optional


class PlotInputError(Exception):
    """Raised for any unusable input: unreadable, malformed, or empty
    CSVs, unknown columns, non-numeric values, or bad spec files."""


@dataclass(frozen=True, slots=True)
class FigureSpec:
    csv_path: str
    x_column: str
    y_column: str
    output_path: str
    series_column: Optional[str] = None
    # a second line drawn from another column of the same rows
    # (e.g. the detection-off counterpart written by the sweep)
    baseline_column: Optional[str] = None
    series_label: str = ""
    baseline_label: str = "baseline"
    title: str = ""
    x_label: Optional[str] = None
    y_label: Optional[str] = None

    def validate(self) -> None:
        for name in ("csv_path", "x_column", "y_column", "output_path"):
            if not getattr(self, name):
                raise PlotInputError(f"figure spec is missing {name}")


_FIELDS = {f.name for f in fields(FigureSpec)}


_REQUIRED = ("csv_path", "x_column", "y_column", "output_path")


def spec_from_mapping(data: dict) -> FigureSpec:
    if not isinstance(data, dict):
        raise PlotInputError("figure spec must be a JSON object")
    unknown = set(data) - _FIELDS
    if unknown:
        raise PlotInputError(
            f"unknown figure spec keys: {', '.join(sorted(unknown))}")
    missing = [name for name in _REQUIRED if not data.get(name)]
    if missing:
        raise PlotInputError(
            f"figure spec is missing {', '.join(missing)}")
    spec = FigureSpec(**{k: data[k] for k in data})
    spec.validate()
    return spec


def load_spec(path: str) -> FigureSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise PlotInputError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PlotInputError(f"bad JSON in spec {path}: {exc}") from exc
    return spec_from_mapping(data)
