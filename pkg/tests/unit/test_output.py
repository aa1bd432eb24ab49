import json
import math
from pathlib import Path

from renosched.output import (
    OutputFormat,
    append_to_file,
    csv_text,
    format_rows_as_table,
    write_to_file,
)

ROWS = [
    {"label": "S|-|-", "hypervolume": 0.75, "min_dist": math.inf},
    {"label": "LE|H|-", "hypervolume": 1 / 3, "pf_size": 4},
]


def test_table_aligns_columns() -> None:
    lines = format_rows_as_table(ROWS).splitlines()

    assert lines[0].split(" | ")[0].strip() == "label"
    assert "pf_size" in lines[0]
    assert set(lines[1]) == {"-"}
    assert "inf" in lines[2]
    assert "0.333333" in lines[3]
    assert len({len(line) for line in lines[2:]}) == 1


def test_table_without_rows() -> None:
    assert format_rows_as_table([]) == "No rows to display."


def test_json_replaces_infinity() -> None:
    data = json.loads(OutputFormat.JSON.format(ROWS))

    assert data[0]["min_dist"] is None
    assert data[1]["hypervolume"] == 1 / 3


def test_csv_fills_missing_cells() -> None:
    lines = OutputFormat.CSV.format(ROWS).splitlines()

    assert lines[0] == "label,hypervolume,min_dist,pf_size"
    assert lines[1] == "S|-|-,0.75,inf,"
    assert lines[2] == "LE|H|-,0.3333333333333333,,4"


def test_csv_text_keeps_float_precision() -> None:
    text = csv_text(["a", "b"], [[0.1 + 0.2, 3]])

    assert text == "a,b\n0.30000000000000004,3\n"


def test_write_and_append(tmp_path: Path) -> None:
    target = tmp_path / "deep" / "summary.csv"

    assert write_to_file("a\n", target)
    assert append_to_file("b\n", target)
    assert target.read_text(encoding="utf-8") == "a\nb\n"


def test_write_failure_returns_false(tmp_path: Path) -> None:
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")

    assert not write_to_file("x", blocker / "out.txt")
    assert not append_to_file("x", blocker / "out.txt")
