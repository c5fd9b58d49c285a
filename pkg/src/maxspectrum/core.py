"""Time-series ingestion and the transforms that prepare raw series for tail analysis.

A time series is carried around as a 1-D ``float64`` NumPy array; :func:`as_series`
is the single validation gate every estimator goes through.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

Tail = Literal["upper", "lower"]
TransformKind = Literal["none", "log-returns", "neg-log-returns", "positive-part"]

TAILS: tuple[str, ...] = ("upper", "lower")
TRANSFORMS: tuple[str, ...] = ("none", "log-returns", "neg-log-returns", "positive-part")


class DataError(ValueError):
    """Input data is malformed: unreadable file, bad cell, non-finite value."""


class EstimationError(ValueError):
    """The data is well formed but the estimator cannot be evaluated on it."""


class ConfigError(ValueError):
    """An invalid configuration or parameter combination."""


def as_series(x: Sequence[float] | np.ndarray, min_length: int = 1) -> np.ndarray:
    """Return ``x`` as a 1-D float array, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"expected a 1-D series, got shape {arr.shape}")
    if arr.size < min_length:
        raise DataError(f"series has {arr.size} values, need at least {min_length}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise DataError(f"non-finite value at position {int(bad[0])}")
    return arr


def load_csv(path: str | Path, column: str | int = 0) -> np.ndarray:
    """Read one numeric column of a comma-separated file.

    ``column`` is either a header name or a zero-based index. A header row is
    assumed to be present iff the first row's selected cell does not parse as a
    number (or ``column`` is a name). Lines starting with ``#`` are comments.
    Row numbers in error messages are 1-based file lines.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        numbered = [
            (lineno, row)
            for lineno, row in enumerate(csv.reader(fh), start=1)
            if not (row and row[0].lstrip().startswith("#"))
        ]
    if not numbered:
        raise DataError(f"{path}: file is empty")
    rows = [row for _, row in numbered]

    start = 0
    if isinstance(column, str) and not column.lstrip("-").isdigit():
        header = [h.strip() for h in rows[0]]
        if column not in header:
            raise DataError(f"{path}: column {column!r} not in header {header}")
        idx = header.index(column)
        start = 1
    else:
        idx = int(column)
        if idx < 0:
            raise DataError(f"{path}: negative column index {idx}")
        first = rows[0][idx].strip() if idx < len(rows[0]) else ""
        if not _is_number(first):
            start = 1

    values = []
    for lineno, row in numbered[start:]:
        if not row:
            raise DataError(f"{path}: row {lineno}: empty row")
        if idx >= len(row):
            raise DataError(f"{path}: row {lineno}: missing column {idx}")
        cell = row[idx].strip()
        if not _is_number(cell):
            raise DataError(f"{path}: row {lineno}, column {idx}: cannot parse {cell!r} as a number")
        value = float(cell)
        if not math.isfinite(value):
            raise DataError(f"{path}: row {lineno}, column {idx}: non-finite value {cell!r}")
        values.append(value)
    if not values:
        raise DataError(f"{path}: no data rows")
    return np.array(values, dtype=float)


def write_csv(
    path: str | Path,
    x: Sequence[float] | np.ndarray,
    header: str | None = "value",
    comments: Sequence[str] = (),
) -> None:
    """Write a single-column CSV whose values reload bit-exactly via :func:`load_csv`."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        if header is not None:
            fh.write(header + "\n")
        for v in np.asarray(x, dtype=float):
            fh.write(repr(float(v)) + "\n")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def log_returns(x: Sequence[float] | np.ndarray) -> np.ndarray:
    """r_t = ln(x_{t+1} / x_t) for a strictly positive price series."""
    x = as_series(x, min_length=2)
    if np.any(x <= 0):
        pos = int(np.flatnonzero(x <= 0)[0])
        raise DataError(f"non-positive price {x[pos]!r} at position {pos}")
    return np.diff(np.log(x))


def extract_tail(x: Sequence[float] | np.ndarray, side: Tail = "upper", mode: str = "clamp") -> np.ndarray:
    """Positive part of ``x`` (upper tail) or of ``-x`` (lower tail).

    ``mode="clamp"`` keeps every time position and sets the other side to zero,
    so block structure and exceedance gaps are preserved. ``mode="delete"``
    drops the non-positive entries instead (a sensitivity-analysis option only:
    it alters the time axis).
    """
    x = as_series(x)
    if side == "upper":
        y = x
    elif side == "lower":
        y = -x
    else:
        raise ConfigError(f"unknown tail {side!r}; expected one of {TAILS}")
    if mode == "clamp":
        return np.maximum(y, 0.0)
    if mode == "delete":
        return y[y > 0]
    raise ConfigError(f"unknown tail mode {mode!r}; expected 'clamp' or 'delete'")


def prepare_series(
    x: Sequence[float] | np.ndarray,
    transform: TransformKind = "none",
    tail: Tail | None = None,
    tail_mode: str = "clamp",
) -> np.ndarray:
    """Apply the returns transform first, then the tail selection."""
    x = as_series(x)
    if transform == "none":
        y = x
    elif transform == "log-returns":
        y = log_returns(x)
    elif transform == "neg-log-returns":
        y = -log_returns(x)
    elif transform == "positive-part":
        y = np.maximum(x, 0.0)
    else:
        raise ConfigError(f"unknown transform {transform!r}; expected one of {TRANSFORMS}")
    if tail is not None:
        y = extract_tail(y, tail, mode=tail_mode)
    return y
