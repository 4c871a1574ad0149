"""CSV / JSON reading and atomic writing."""
import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

__all__ = ["CsvFormatError", "DataTable", "read_table", "write_table", "format_number",
           "to_jsonable", "dumps_json", "load_json", "atomic_write"]


class CsvFormatError(ConfigError):
    """Malformed input file; the message names the offending row and column."""


class DataTable:
    """Numeric samples x columns table with a header."""

    def __init__(self, columns, values):
        self.columns = list(columns)
        self.values = np.asarray(values, dtype=float).reshape(-1, len(self.columns))

    @property
    def n_samples(self):
        return self.values.shape[0]

    def select(self, names):
        missing = [c for c in names if c not in self.columns]
        if missing:
            raise ConfigError(f"columns not found in data: {missing}")
        idx = [self.columns.index(c) for c in names]
        return self.values[:, idx]


def read_table(path_or_text, from_text=False):
    """Parse a CSV with a header row and numeric cells.

    Ragged rows, empty or non-numeric cells and duplicate headers raise
    :class:`CsvFormatError`; data rows are numbered from 2 (the header is row 1).
    """
    if from_text:
        text = path_or_text
    else:
        try:
            text = Path(path_or_text).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path_or_text}: {exc.strerror or exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise CsvFormatError("empty file: no header row")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise CsvFormatError(f"row 1: empty column name at column {header.index('') + 1}")
    dup = sorted({h for h in header if header.count(h) > 1})
    if dup:
        raise CsvFormatError(f"row 1: duplicate column names {dup}")
    if len(rows) == 1:
        raise CsvFormatError("header only: the file has no data rows")
    values = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise CsvFormatError(f"row {i + 2}: expected {len(header)} cells, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise CsvFormatError(f"row {i + 2}, column {j + 1} ({header[j]!r}): "
                                     f"non-numeric value {cell.strip()!r}") from None
            if not math.isfinite(v):
                raise CsvFormatError(f"row {i + 2}, column {j + 1} ({header[j]!r}): "
                                     f"non-finite value {cell.strip()!r}")
            values[i, j] = v
    return DataTable(header, values)


def format_number(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_table(path, columns, rows):
    """Write ``rows`` (iterables matching ``columns``) with 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    atomic_write(path, buf.getvalue())


def to_jsonable(obj):
    """Recursively convert numpy types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dumps_json(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from exc


def atomic_write(path, text):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
