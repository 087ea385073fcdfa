"""CSV emission at full float precision, written atomically."""

from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """17 significant digits: enough to round-trip any float64."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv_atomic(path, header: list[str], rows) -> Path:
    """Write rows (iterable of tuples) to path via temp file + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read back a numeric CSV as (header, float array of shape (rows, cols))."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return header, data
