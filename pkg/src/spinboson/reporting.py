"""Deterministic CSV/JSON output helpers.

Floats are written with 17 significant digits so identical runs produce
byte-identical files; every file is written to a temp path and renamed, so
no output is ever observed half-written.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .errors import SchemaError

__all__ = ["format_value", "atomic_write_text", "write_csv", "write_json", "read_csv_columns"]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path, payload):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv_columns(path, columns) -> dict:
    """Read named numeric columns; names a missing or malformed column."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input CSV {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"input CSV {path} has no header row")
        for col in columns:
            if col not in reader.fieldnames:
                raise SchemaError(f"input CSV {path} is missing column {col!r}")
        data = {col: [] for col in columns}
        for i, row in enumerate(reader, start=2):
            for col in columns:
                raw = row[col]
                try:
                    data[col].append(float(raw))
                except (TypeError, ValueError):
                    raise SchemaError(
                        f"column {col!r} of {path} has malformed value {raw!r} on line {i}"
                    ) from None
    return {col: np.array(vals) for col, vals in data.items()}
