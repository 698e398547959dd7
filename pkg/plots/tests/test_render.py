"""Renderer unit tests.

Every expected number in this file is hand-computed from the canned CSV
directly above it, using exactly representable decimal values so the
string comparisons against the sidecar are exact.
"""

import math

import pytest

from grayhole_plots import FigureSpec, PlotInputError, render
from grayhole_plots.render import (aggregate, read_rows, sidecar_path)
from grayhole_plots.spec import load_spec, spec_from_mapping


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_sidecar(path):
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "series,x,y,err,n"
    return [tuple(ln.split(",")) for ln in lines[1:]]


RAW_CSV = """\
# overhead_pct = 100 * control / data
axis_value,repeat,seed,pdr,pdr_baseline
5,0,3,0.900000,0.500000
5,1,4,0.700000,0.300000
10,0,3,0.600000,0.400000
10,1,4,0.800000,0.200000
"""


def spec_for(csv_path, out_path, **kw):
    base = dict(csv_path=csv_path, x_column="axis_value",
                y_column="pdr", output_path=out_path)
    base.update(kw)
    return FigureSpec(**base)


def test_sidecar_matches_hand_computed_mean_and_std(tmp_path):
    # x=5: mean(0.9, 0.7) = 0.8, sample std = sqrt((0.1^2 + 0.1^2)/1)
    #      = sqrt(0.02) = 0.141421...
    # x=10: mean(0.6, 0.8) = 0.7, same deviations, same std.
    csv_path = write(tmp_path / "raw.csv", RAW_CSV)
    image, side = render(spec_for(csv_path, str(tmp_path / "fig.png"),
                                  series_label="detection on"))
    expected_std = f"{math.sqrt(0.02):.6f}"
    assert read_sidecar(side) == [
        ("detection on", "5", "0.800000", expected_std, "2"),
        ("detection on", "10", "0.700000", expected_std, "2"),
    ]
    assert (tmp_path / "fig.png").stat().st_size > 0
    assert image == str(tmp_path / "fig.png")


def test_baseline_column_becomes_second_series(tmp_path):
    # baseline x=5: mean(0.5, 0.3) = 0.4; x=10: mean(0.4, 0.2) = 0.3.
    csv_path = write(tmp_path / "raw.csv", RAW_CSV)
    _, side = render(spec_for(csv_path, str(tmp_path / "fig.png"),
                              baseline_column="pdr_baseline",
                              series_label="detection on",
                              baseline_label="detection off"))
    rows = read_sidecar(side)
    assert ("detection off", "5", "0.400000", f"{math.sqrt(0.02):.6f}",
            "2") in rows
    assert ("detection off", "10", "0.300000", f"{math.sqrt(0.02):.6f}",
            "2") in rows
    assert len(rows) == 4


def test_summary_input_trusts_std_column(tmp_path):
    # Pre-aggregated rows (one per x) with an explicit stddev column:
    # the sidecar must copy pdr_std verbatim, not recompute 0.0.
    csv_path = write(tmp_path / "summary.csv", """\
axis_value,runs,pdr_mean,pdr_std
5.000000,10,0.925000,0.031250
10.000000,10,0.875000,0.062500
""")
    _, side = render(FigureSpec(csv_path=csv_path, x_column="axis_value",
                                y_column="pdr_mean",
                                output_path=str(tmp_path / "fig.png"),
                                series_label="detection on"))
    assert read_sidecar(side) == [
        ("detection on", "5", "0.925000", "0.031250", "1"),
        ("detection on", "10", "0.875000", "0.062500", "1"),
    ]


def test_std_column_ignored_when_groups_have_several_rows(tmp_path):
    # With two raw rows per x the stddev must be computed from the rows
    # even though a (here nonsensical) pdr_std column is present.
    csv_path = write(tmp_path / "raw.csv", """\
axis_value,pdr,pdr_std
5,0.900000,9.000000
5,0.700000,9.000000
""")
    _, side = render(spec_for(csv_path, str(tmp_path / "fig.png")))
    rows = read_sidecar(side)
    assert rows == [("pdr", "5", "0.800000", f"{math.sqrt(0.02):.6f}", "2")]


def test_single_row_group_without_std_column_gets_zero_err(tmp_path):
    csv_path = write(tmp_path / "raw.csv", """\
axis_value,pdr
5,0.750000
""")
    _, side = render(spec_for(csv_path, str(tmp_path / "fig.png")))
    assert read_sidecar(side) == [("pdr", "5", "0.750000", "0.000000", "1")]


def test_series_column_orders_numeric_series_by_value(tmp_path):
    # Lexicographic order would put "10" before "5"; numeric must win.
    csv_path = write(tmp_path / "raw.csv", """\
axis_value,malicious_count,fpr
0,5,0.010000
0,10,0.020000
20,5,0.030000
20,10,0.040000
""")
    _, side = render(FigureSpec(csv_path=csv_path, x_column="axis_value",
                                y_column="fpr",
                                series_column="malicious_count",
                                output_path=str(tmp_path / "fig.png")))
    assert read_sidecar(side) == [
        ("5", "0", "0.010000", "0.000000", "1"),
        ("5", "20", "0.030000", "0.000000", "1"),
        ("10", "0", "0.020000", "0.000000", "1"),
        ("10", "20", "0.040000", "0.000000", "1"),
    ]


def test_sidecar_is_byte_identical_across_renders(tmp_path):
    csv_path = write(tmp_path / "raw.csv", RAW_CSV)
    _, side_a = render(spec_for(csv_path, str(tmp_path / "a.png"),
                                baseline_column="pdr_baseline"))
    _, side_b = render(spec_for(csv_path, str(tmp_path / "b.png"),
                                baseline_column="pdr_baseline"))
    bytes_a = open(side_a, "rb").read()
    bytes_b = open(side_b, "rb").read()
    assert bytes_a == bytes_b


def test_sidecar_path_replaces_extension():
    assert sidecar_path("/tmp/out/fig.png") == "/tmp/out/fig.points.csv"
    assert sidecar_path("fig.svg") == "fig.points.csv"


def test_comment_lines_are_skipped(tmp_path):
    csv_path = write(tmp_path / "raw.csv", """\
# formula comment line
axis_value,pdr
# another comment between rows
5,0.500000
""")
    rows = read_rows(csv_path)
    assert rows == [{"axis_value": "5", "pdr": "0.500000"}]


def test_missing_file_is_a_named_input_error(tmp_path):
    with pytest.raises(PlotInputError, match="cannot read csv"):
        read_rows(str(tmp_path / "nope.csv"))


def test_header_only_csv_is_rejected(tmp_path):
    csv_path = write(tmp_path / "raw.csv", "axis_value,pdr\n")
    with pytest.raises(PlotInputError, match="no data rows"):
        read_rows(csv_path)


def test_empty_csv_is_rejected(tmp_path):
    csv_path = write(tmp_path / "raw.csv", "")
    with pytest.raises(PlotInputError, match="no header row"):
        read_rows(csv_path)


def test_row_with_extra_fields_is_rejected(tmp_path):
    csv_path = write(tmp_path / "raw.csv",
                     "axis_value,pdr\n5,0.5,SURPLUS\n")
    with pytest.raises(PlotInputError, match="line 2.*more fields"):
        read_rows(csv_path)


def test_row_with_missing_fields_is_rejected(tmp_path):
    csv_path = write(tmp_path / "raw.csv",
                     "axis_value,pdr,seed\n5,0.5,1\n10,0.25\n")
    with pytest.raises(PlotInputError, match="line 3.*fewer fields"):
        read_rows(csv_path)


def test_missing_column_error_names_the_column(tmp_path):
    csv_path = write(tmp_path / "raw.csv", "axis_value,pdr\n5,0.5\n")
    spec = spec_for(csv_path, str(tmp_path / "fig.png"),
                    y_column="no_such_metric")
    with pytest.raises(PlotInputError, match="no_such_metric"):
        render(spec)


def test_non_numeric_cell_error_names_column_and_value(tmp_path):
    csv_path = write(tmp_path / "raw.csv", "axis_value,pdr\n5,oops\n")
    with pytest.raises(PlotInputError, match="'oops'.*'pdr'"):
        render(spec_for(csv_path, str(tmp_path / "fig.png")))


def test_aggregate_groups_and_sorts_by_x(tmp_path):
    rows = [
        {"x": "10", "y": "4.0"},
        {"x": "2", "y": "1.0"},
        {"x": "2", "y": "3.0"},
    ]
    points = aggregate(rows, "x", "y", None, "mem.csv", series_label="s")
    assert points == [
        ("s", 2.0, 2.0, math.sqrt(2.0), 2),
        ("s", 10.0, 4.0, 0.0, 1),
    ]


def test_spec_mapping_rejects_unknown_keys():
    with pytest.raises(PlotInputError,
                       match="unknown figure spec keys: colour"):
        spec_from_mapping({"csv_path": "a.csv", "x_column": "x",
                           "y_column": "y", "output_path": "a.png",
                           "colour": "red"})


def test_spec_mapping_rejects_missing_required_field():
    with pytest.raises(PlotInputError, match="missing y_column"):
        spec_from_mapping({"csv_path": "a.csv", "x_column": "x",
                           "output_path": "a.png"})


def test_spec_mapping_rejects_non_object():
    with pytest.raises(PlotInputError, match="JSON object"):
        spec_from_mapping(["not", "a", "mapping"])


def test_load_spec_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(PlotInputError, match="bad JSON"):
        load_spec(str(path))


def test_load_spec_rejects_missing_file(tmp_path):
    with pytest.raises(PlotInputError, match="cannot read spec"):
        load_spec(str(tmp_path / "absent.json"))


def test_load_spec_round_trip(tmp_path):
    path = tmp_path / "fig.json"
    path.write_text(
        '{"csv_path": "raw.csv", "x_column": "axis_value",\n'
        ' "y_column": "pdr", "output_path": "fig.png",\n'
        ' "baseline_column": "pdr_baseline", "title": "t"}',
        encoding="utf-8")
    spec = load_spec(str(path))
    assert spec.csv_path == "raw.csv"
    assert spec.baseline_column == "pdr_baseline"
    assert spec.title == "t"
