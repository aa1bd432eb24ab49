"""
Output formatting for metric tables and CSV artifacts
"""

import csv
import io
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from enum import Enum
from pathlib import Path
from typing import Any, assert_never

logger = logging.getLogger(__name__)

Row = Mapping[str, Any]


class OutputFormat(Enum):
    """Enumeration of supported output formats."""

    TABLE = "table"
    JSON = "json"
    CSV = "csv"

    def format(self, rows: Sequence[Row]) -> str:
        """Format rows based on the selected output format."""
        match self:
            case OutputFormat.TABLE:
                return format_rows_as_table(rows)
            case OutputFormat.JSON:
                return format_rows_as_json(rows)
            case OutputFormat.CSV:
                return format_rows_as_csv(rows)
            case _:
                assert_never(self)


def _fields(rows: Sequence[Row]) -> list[str]:
    """Column names in first-seen order."""
    return list(dict.fromkeys(key for row in rows for key in row))


def _cell(value: Any) -> str:  # noqa: ANN401
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.6g}"
    return str(value)


def format_rows_as_table(rows: Sequence[Row], min_col_width: int = 10) -> str:
    """Format rows as an aligned text table."""
    if not rows:
        return "No rows to display."

    fields = _fields(rows)
    cells = [[_cell(row.get(field, "")) for field in fields] for row in rows]
    col_widths = [
        max(min_col_width, len(field), *(len(line[i]) for line in cells))
        for i, field in enumerate(fields)
    ]

    header = " | ".join(f"{field:<{col_widths[i]}}" for i, field in enumerate(fields))
    separator = "-" * len(header)
    lines = [
        " | ".join(f"{value:<{col_widths[i]}}" for i, value in enumerate(line))
        for line in cells
    ]
    return "\n".join([header, separator, *lines])


def format_rows_as_json(rows: Sequence[Row]) -> str:
    """Format rows as a JSON list; infinities become null."""
    cleaned = [
        {
            key: None if isinstance(value, float) and math.isinf(value) else value
            for key, value in row.items()
        }
        for row in rows
    ]
    return json.dumps(cleaned, indent=2, ensure_ascii=False)


def format_rows_as_csv(rows: Sequence[Row]) -> str:
    """Format rows as CSV."""
    if not rows:
        return ""
    fields = _fields(rows)
    return csv_text(fields, ([row.get(f, "") for f in fields] for row in rows))


def csv_text(fields: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV document with a header line; floats keep full precision."""
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(fields)
    writer.writerows(
        [repr(value) if isinstance(value, float) else value for value in row]
        for row in rows
    )
    return output.getvalue()


def write_to_file(content: str, filepath: Path) -> bool:
    """Write content to a file, creating directory if needed."""
    try:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with filepath.open("w", encoding="utf-8") as f:
            f.write(content)
    except OSError as e:
        msg = f"Error writing to {filepath}: {e}"
        logger.error(msg)
        return False
    else:
        return True


def append_to_file(content: str, filepath: Path) -> bool:
    """Append content to a file, creating directory if needed."""
    try:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with filepath.open("a", encoding="utf-8") as f:
            f.write(content)
    except OSError as e:
        msg = f"Error appending to {filepath}: {e}"
        logger.error(msg)
        return False
    else:
        return True
