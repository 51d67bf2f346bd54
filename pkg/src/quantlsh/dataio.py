"""Dataset ingestion: CSV rows and the little-endian ``LSHV`` binary format.

``LSHV`` layout: magic ``b"LSHV"``, ``u32`` row count, ``u32`` dimension,
then ``count * dim`` row-major float64 values.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import DatasetFormatError

BIN_MAGIC = b"LSHV"
_BIN_HEADER = struct.Struct("<4sII")


def read_bin(path: str | Path) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Read an ``LSHV`` file. Row ids are the row positions."""
    data = Path(path).read_bytes()
    if len(data) < _BIN_HEADER.size:
        raise DatasetFormatError(f"{path}: file ends at byte {len(data)} inside the {_BIN_HEADER.size}-byte header")
    magic, count, dim = _BIN_HEADER.unpack_from(data, 0)
    if magic != BIN_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r} at byte 0, expected {BIN_MAGIC!r}")
    if dim == 0:
        raise DatasetFormatError(f"{path}: zero dimension at byte 8")
    expected = _BIN_HEADER.size + 8 * count * dim
    if len(data) < expected:
        row = (len(data) - _BIN_HEADER.size) // (8 * dim)
        raise DatasetFormatError(f"{path}: truncated at byte {len(data)} (row {row}); expected {expected} bytes")
    if len(data) > expected:
        raise DatasetFormatError(f"{path}: {len(data) - expected} trailing bytes after byte {expected}")
    X = np.frombuffer(data, dtype="<f8", count=count * dim, offset=_BIN_HEADER.size).reshape(count, dim)
    return np.arange(count, dtype=np.int64), X.astype(np.float64)


def write_bin(path: str | Path, X) -> None:
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {X.shape}")
    Path(path).write_bytes(_BIN_HEADER.pack(BIN_MAGIC, X.shape[0], X.shape[1]) + X.tobytes())


def read_csv(path: str | Path, id_column: bool = False) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Read one vector per row; blank lines and ``#`` comments are skipped.

    With ``id_column`` the first field of every row is an integer id,
    otherwise ids are the 0-based data row numbers.
    """
    ids: list[int] = []
    rows: list[list[float]] = []
    dim = None
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            for lineno, fields in enumerate(csv.reader(fh), start=1):
                if not fields or not "".join(fields).strip() or fields[0].lstrip().startswith("#"):
                    continue
                try:
                    if id_column:
                        ids.append(int(fields[0]))
                        fields = fields[1:]
                    else:
                        ids.append(len(rows))
                    values = [float(f) for f in fields]
                except ValueError as exc:
                    raise DatasetFormatError(f"{path}: row {lineno}: {exc}") from None
                if dim is None:
                    dim = len(values)
                    if dim == 0:
                        raise DatasetFormatError(f"{path}: row {lineno}: no values")
                elif len(values) != dim:
                    raise DatasetFormatError(f"{path}: row {lineno}: {len(values)} values, expected {dim}")
                rows.append(values)
        except UnicodeDecodeError as exc:
            raise DatasetFormatError(f"{path}: not UTF-8 text ({exc.reason})") from None
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return np.array(ids, dtype=np.int64), np.array(rows, dtype=np.float64)


def write_csv(path: str | Path, X, ids=None) -> None:
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i, row in enumerate(X):
            vals = [repr(float(v)) for v in row]
            writer.writerow(vals if ids is None else [int(ids[i]), *vals])


def load_dataset(path: str | Path, fmt: str | None = None, id_column: bool = False):
    """Dispatch on ``fmt`` (``"csv"`` or ``"bin"``), else on the file suffix."""
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "bin"
    if fmt == "csv":
        return read_csv(path, id_column=id_column)
    if fmt == "bin":
        return read_bin(path)
    raise ValueError(f"unknown dataset format {fmt!r}")
