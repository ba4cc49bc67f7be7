"""Numeric CSV input and output.

Files are comma separated with a mandatory header row and ``.`` decimals.
Every cell written by :func:`write_csv` is a finite number, so each result
file reads back through :func:`load_csv` or :func:`read_table`.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError

__all__ = ["read_table", "load_csv", "write_csv", "format_number"]


def format_number(v) -> str:
    """Shortest round-tripping text; integers print without a decimal point."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"refusing to write non-finite value {v}")
    return repr(v)


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and ``(rows, columns)`` float array of a numeric CSV."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as err:
        raise ParseError(f"cannot read {path}: {err}") from err
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header) or any(h == "" for h in header):
        raise ParseError(f"{path}: header names must be unique and non-empty")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {i}, column '{header[j]}': not a number: {cell!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"{path}: row {i}, column '{header[j]}': non-finite value {cell!r}")
            data[i - 2, j] = value
    return header, data


def load_csv(path, feature_cols: Sequence[str], target_col: str | None) -> tuple[np.ndarray, np.ndarray | None]:
    """Regression inputs ``X`` (rows in file order) and targets ``y``.

    Row numbers in error messages count the header as row 1.  With
    ``target_col=None`` only ``X`` is read and ``y`` is ``None``.
    """
    header, data = read_table(path)
    if data.shape[0] == 0:
        raise ParseError(f"{path}: no data rows (empty dataset)")
    wanted = list(feature_cols) + ([target_col] if target_col is not None else [])
    missing = [c for c in wanted if c not in header]
    if missing:
        raise ParseError(f"{path}: missing columns {missing}; header is {header}")
    X = data[:, [header.index(c) for c in feature_cols]]
    y = data[:, header.index(target_col)] if target_col is not None else None
    return X, y


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row length does not match header")
            writer.writerow([format_number(v) for v in row])
    return path
