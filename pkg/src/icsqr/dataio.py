"""Reading and writing delimited numeric files and JSON documents.

Numbers are written with 17 significant digits, which is enough for every
64-bit float to survive a write/read round trip unchanged.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteInput, ShapeError

FLOAT_FORMAT = "%.17g"


class Orientation(str, enum.Enum):
    OBS_ROWS = "obs-rows"
    VARS_ROWS = "vars-rows"


class ParseError(ValueError):
    """A dataset file that cannot be turned into a numeric matrix."""


@dataclass(frozen=True)
class DatasetFile:
    path: Path
    orientation: Orientation = Orientation.OBS_ROWS
    header: bool | None = None  # None: detect from the first row
    delimiter: str = ","


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray  # p x n
    names: tuple

    @property
    def p(self):
        return self.x.shape[0]

    @property
    def n(self):
        return self.x.shape[1]


def _is_number(field):
    try:
        float(field)
    except ValueError:
        return False
    return True


def read_dataset(spec):
    """Parse ``spec.path`` into a ``p x n`` matrix plus variable names.

    Raises
    ------
    ParseError
        Unreadable file, ragged rows or non-numeric cells.
    NonFiniteInput
        NaN or infinite values.
    ShapeError
        Fewer than two observations.
    """
    path = Path(spec.path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh, delimiter=spec.delimiter) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except csv.Error as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path} contains no data")

    header = spec.header
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    names = tuple(c.strip() for c in rows[0]) if header else None
    body = rows[1:] if header else rows
    if not body:
        raise ParseError(f"{path} has a header but no data rows")

    width = len(body[0])
    try:
        values = np.empty((len(body), width))
        for i, row in enumerate(body):
            if len(row) != width:
                line = i + 1 + int(header)
                raise ParseError(f"{path}, line {line}: expected {width} fields, found {len(row)}")
            values[i] = [float(c) for c in row]
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: non-numeric value ({exc})") from exc
    if not np.isfinite(values).all():
        raise NonFiniteInput(f"{path} contains NaN or infinite values")

    x = values.T if Orientation(spec.orientation) is Orientation.OBS_ROWS else values
    x = np.ascontiguousarray(x)
    if x.shape[1] < 2:
        raise ShapeError(f"{path}: need at least 2 observations, found {x.shape[1]}")
    if names is None or len(names) != x.shape[0]:
        names = tuple(f"x{j + 1}" for j in range(x.shape[0]))
    return Dataset(x=x, names=names)


def format_float(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return FLOAT_FORMAT % v


def write_table(path, header, rows, delimiter=","):
    """Write rows of numbers (formatted with 17 significant digits) or strings."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else _cell(c) for c in row])


def _cell(c):
    if isinstance(c, (int, np.integer)) and not isinstance(c, bool):
        return str(int(c))
    return format_float(c)


def write_matrix(path, x, names, row_label=None, row_ids=None):
    """One row per entry of ``x`` (first axis), optional leading id column."""
    header = ([row_label] if row_label else []) + list(names)
    rows = []
    for i, r in enumerate(np.asarray(x)):
        lead = [row_ids[i]] if row_label else []
        rows.append(lead + list(r))
    write_table(path, header, rows)


def to_jsonable(obj):
    """Recursively convert numpy values; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")
