"""Versioned CSV tables.

Every table written by the package starts with a comment line
``# htemech-csv v1 <schema>`` followed by a normal header row.  Readers check
the version and schema when the comment is present; plain CSV files from
elsewhere (no comment) are accepted as-is.
"""

from __future__ import annotations

import csv
import io
import os
from typing import Iterable, Sequence

CSV_VERSION = "v1"
MAGIC = "htemech-csv"

SCHEMAS = {
    "results": ("cell_id", "n", "q", "mu", "outcome", "estimator", "rep", "coef", "estimate", "se", "t", "p",
                "reject"),
    "power": ("cell_id", "n", "q", "outcome", "estimator", "coef", "power", "mean_est", "valid_reps"),
    "bayes_density": ("p", "prior_density", "posterior_density"),
    "voter_dataset": ("unit_id", "c", "lambda", "a", "eps", "y1", "y2"),
}


class CsvSchemaError(ValueError):
    pass


def format_value(v) -> str:
    """Shortest round-trip text for floats; plain ``str`` otherwise."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_table(schema: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# {MAGIC} {CSV_VERSION} {schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def write_table(path, schema: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    text = render_table(schema, header, rows)
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def parse_table(text: str, schema: str | None = None) -> tuple[list, list]:
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        parts = lines[0][1:].split()
        if len(parts) < 2 or parts[0] != MAGIC:
            raise CsvSchemaError(f"unrecognised CSV header comment: {lines[0]!r}")
        if parts[1] != CSV_VERSION:
            raise CsvSchemaError(f"CSV version {parts[1]} is not supported (expected {CSV_VERSION})")
        found = parts[2] if len(parts) > 2 else None
        if schema is not None and found is not None and found != schema:
            raise CsvSchemaError(f"expected a {schema!r} table, found {found!r}")
        lines = lines[1:]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvSchemaError("CSV has no header row") from None
    rows = [r for r in reader if r]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise CsvSchemaError(f"row {i + 1} has {len(r)} fields, header has {len(header)}")
    return header, rows


def read_table(path, schema: str | None = None) -> tuple[list, list]:
    with open(path, newline="") as fh:
        return parse_table(fh.read(), schema)
