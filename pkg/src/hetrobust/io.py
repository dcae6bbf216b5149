"""CSV and JSON readers/writers for profiles and datasets."""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .estimators import Dataset
from .exceptions import DomainError
from .profile import CorruptionProfile

__all__ = ["CsvFormatError", "load_profile", "load_dataset", "write_dataset", "write_flags"]


class CsvFormatError(DomainError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"{message} at line {line}")
        self.line = line


def _parse_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    while rows and not any(cell.strip() for cell in rows[-1]):
        rows.pop()
    if not rows:
        raise CsvFormatError("empty file", 1)
    return [c.strip() for c in rows[0]], rows[1:]


def _float(cell: str, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CsvFormatError(f"column {column!r}: not a number {cell!r}", line) from None
    if not np.isfinite(value):
        raise CsvFormatError(f"column {column!r}: non-finite value", line)
    return value


def _lambda(cell: str, line: int) -> float:
    value = _float(cell, line, "lambda")
    if not 0.0 <= value <= 1.0:
        raise CsvFormatError("lambda out of range", line)
    return value


def load_profile(path, inflation: float = 1.0) -> CorruptionProfile:
    """Single-column CSV with header ``lambda``, or a JSON array of rates."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path) as fh:
            values = json.load(fh)
        if not isinstance(values, list):
            raise DomainError("profile JSON must be an array of numbers")
        for i, v in enumerate(values):
            if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                raise DomainError(f"lambda out of range at index {i}")
        return CorruptionProfile.from_values(values, inflation)
    header, rows = _parse_rows(path)
    if header != ["lambda"]:
        raise CsvFormatError("expected the single header 'lambda'", 1)
    values = []
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != 1:
            raise CsvFormatError(f"expected 1 field, found {len(row)}", line)
        values.append(_lambda(row[0], line))
    return CorruptionProfile.from_values(values, inflation)


_MEAN_COL = re.compile(r"x(\d+)$")
_REG_COL = re.compile(r"w(\d+)$")


def _detect(header):
    if not header or header[-1] != "lambda":
        raise CsvFormatError("last column must be 'lambda'", 1)
    body = header[:-1]
    if body and all(_MEAN_COL.match(c) for c in body):
        expected = [f"x{j + 1}" for j in range(len(body))]
        mode = "mean"
    elif len(body) >= 2 and body[-1] == "y" and all(_REG_COL.match(c) for c in body[:-1]):
        expected = [f"w{j + 1}" for j in range(len(body) - 1)] + ["y"]
        mode = "regression"
    else:
        raise CsvFormatError("header must be x1..xd,lambda or w1..wd,y,lambda", 1)
    if body != expected:
        raise CsvFormatError(f"expected columns {','.join(expected)},lambda", 1)
    return mode


def load_dataset(path, inflation: float = 1.0) -> Dataset:
    """Dataset CSV: ``x1..xd,lambda`` (mean) or ``w1..wd,y,lambda`` (regression).

    Errors carry the 1-based line number of the offending row.
    """
    header, rows = _parse_rows(path)
    mode = _detect(header)
    width = len(header)
    values = np.empty((len(rows), width - 1))
    lam = np.empty(len(rows))
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != width:
            raise CsvFormatError(f"expected {width} fields, found {len(row)}", line)
        for j, cell in enumerate(row[:-1]):
            values[offset, j] = _float(cell.strip(), line, header[j])
        lam[offset] = _lambda(row[-1].strip(), line)
    if not rows:
        raise CsvFormatError("no data rows", 2)
    profile = CorruptionProfile.from_values(lam, inflation)
    if mode == "mean":
        return Dataset(values, profile)
    return Dataset(values[:, :-1], profile, values[:, -1])


def write_dataset(data: Dataset, path) -> None:
    """Write in the schema ``load_dataset`` reads; floats use shortest round-trip repr."""
    lam = data.profile.in_input_order()
    if data.mode == "mean":
        header = [f"x{j + 1}" for j in range(data.d)] + ["lambda"]
        body = data.points
    else:
        header = [f"w{j + 1}" for j in range(data.d)] + ["y", "lambda"]
        body = np.column_stack([data.points, data.responses])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row, li in zip(body, lam):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(li))])


def write_flags(data: Dataset, path) -> None:
    """Diagnostic side file with the realised corruption flags."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "corrupted"])
        for i, flag in enumerate(data.corrupted):
            writer.writerow([i, int(flag)])
