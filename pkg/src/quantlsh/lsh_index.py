"""Standard (K, L)-LSH index over quantized random projections."""

from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .coding import CodingParams, Scheme, quantize
from .errors import DatasetFormatError, DimensionMismatch, EmptyDataset, InvalidParams
from .projections import DataVector, ProjectionEnsemble, generate_ensemble

SNAPSHOT_MAGIC = b"LSHI"
SNAPSHOT_VERSION = 1
_SCHEME_CODE = {Scheme.UQ: 0, Scheme.UQ_OFFSET: 1}
_HEADER = struct.Struct("<4sIIIBdQII")
_UNIT_TOL = 1e-8


@dataclass(frozen=True)
class LshConfig:
    K: int
    L: int
    params: CodingParams
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 1 or self.L < 1:
            raise InvalidParams(f"K and L must be >= 1, got K={self.K}, L={self.L}")


class LshIndex:
    """L hash tables keyed by exact K-code tuples; buckets hold point ids.

    Build with :meth:`build`. The index is read-only afterwards.
    """

    def __init__(self, config: LshConfig, ensemble: ProjectionEnsemble, tables, ids: NDArray[np.int64]):
        self.config = config
        self.ensemble = ensemble
        self.tables: list[dict[tuple[int, ...], list[int]]] = tables
        self.ids = ids

    @property
    def size(self) -> int:
        return int(self.ids.shape[0])

    @property
    def dim(self) -> int:
        return self.ensemble.dim_in

    @classmethod
    def build(cls, dataset: Sequence[DataVector], config: LshConfig) -> "LshIndex":
        if len(dataset) == 0:
            raise EmptyDataset("cannot index an empty dataset")
        dim = dataset[0].dim
        for v in dataset:
            if v.dim != dim:
                raise DimensionMismatch(f"point {v.id} has dimension {v.dim}, expected {dim}")
        ids = np.array([v.id for v in dataset], dtype=np.int64)
        X = np.stack([v.values for v in dataset])
        return cls.from_arrays(ids, X, config)

    @classmethod
    def from_arrays(cls, ids, X, config: LshConfig) -> "LshIndex":
        """Build from an id vector and an ``(N, D)`` matrix of unit rows."""
        X = np.asarray(X, dtype=np.float64)
        ids = np.asarray(ids, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyDataset("cannot index an empty dataset")
        if ids.shape != (X.shape[0],):
            raise DimensionMismatch(f"{ids.shape[0]} ids for {X.shape[0]} rows")
        if np.unique(ids).size != ids.size:
            raise InvalidParams("point ids must be unique")
        _check_unit_rows(X)
        ens = generate_ensemble(X.shape[1], config.K, config.L, config.params.scheme, config.params.w, config.seed)
        codes = _codes(X, ens, config.params)
        K = config.K
        tables = []
        id_list = ids.tolist()
        for j in range(config.L):
            buckets: dict[tuple[int, ...], list[int]] = defaultdict(list)
            for pid, key in zip(id_list, map(tuple, codes[:, j * K:(j + 1) * K].tolist())):
                buckets[key].append(pid)
            tables.append(dict(buckets))
        return cls(config, ens, tables, ids)

    def keys_for(self, q) -> list[tuple[int, ...]]:
        """The bucket key of ``q`` in every table."""
        x = _as_row(q, self.dim)
        codes = _codes(x, self.ensemble, self.config.params)[0]
        K = self.config.K
        return [tuple(codes[j * K:(j + 1) * K].tolist()) for j in range(self.config.L)]

    def candidates(self, q) -> list[list[int]]:
        """Matching bucket of ``q`` in each table (empty list when none)."""
        return [table.get(key, []) for table, key in zip(self.tables, self.keys_for(q))]

    def query(self, q) -> set[int]:
        result: set[int] = set()
        for bucket in self.candidates(q):
            result.update(bucket)
        return result

    def fraction_retrieved(self, q) -> float:
        return len(self.query(q)) / self.size

    def save(self, path: str | Path) -> None:
        """Write a binary snapshot. Rebuilding from the seed is equivalent."""
        cfg = self.config
        out = bytearray(
            _HEADER.pack(
                SNAPSHOT_MAGIC,
                SNAPSHOT_VERSION,
                cfg.K,
                cfg.L,
                _SCHEME_CODE[cfg.params.scheme],
                cfg.params.w,
                cfg.seed,
                self.dim,
                self.size,
            )
        )
        out += self.ids.astype("<i8").tobytes()
        for table in self.tables:
            out += struct.pack("<I", len(table))
            for key in sorted(table):
                members = table[key]
                out += np.asarray(key, dtype="<i8").tobytes()
                out += struct.pack("<I", len(members))
                out += np.asarray(members, dtype="<i8").tobytes()
        Path(path).write_bytes(bytes(out))

    @classmethod
    def load(cls, path: str | Path) -> "LshIndex":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size:
            raise DatasetFormatError(f"snapshot truncated at byte {len(data)}: header needs {_HEADER.size} bytes")
        magic, version, K, L, scheme_code, w, seed, dim, size = _HEADER.unpack_from(data, 0)
        if magic != SNAPSHOT_MAGIC:
            raise DatasetFormatError(f"bad magic {magic!r} at byte 0, expected {SNAPSHOT_MAGIC!r}")
        if version != SNAPSHOT_VERSION:
            raise DatasetFormatError(f"unsupported snapshot version {version} at byte 4")
        codes_by_value = {v: k for k, v in _SCHEME_CODE.items()}
        if scheme_code not in codes_by_value:
            raise DatasetFormatError(f"unknown scheme code {scheme_code} at byte 16")
        config = LshConfig(K, L, CodingParams(codes_by_value[scheme_code], w), seed)
        reader = _Reader(data, _HEADER.size)
        ids = reader.array(size, "ids")
        tables = []
        for j in range(L):
            (nb,) = reader.unpack("<I", f"bucket count of table {j}")
            table = {}
            for _ in range(nb):
                key = tuple(reader.array(K, "bucket key").tolist())
                (count,) = reader.unpack("<I", "bucket size")
                table[key] = reader.array(count, "bucket ids").tolist()
            tables.append(table)
        if reader.pos != len(data):
            raise DatasetFormatError(f"trailing bytes after byte {reader.pos}")
        ens = generate_ensemble(dim, K, L, config.params.scheme, w, seed)
        return cls(config, ens, tables, ids)


def build(dataset: Sequence[DataVector], config: LshConfig) -> LshIndex:
    return LshIndex.build(dataset, config)


def query(index: LshIndex, q) -> set[int]:
    return index.query(q)


def fraction_retrieved(index: LshIndex, q) -> float:
    return index.fraction_retrieved(q)


def mean_fraction_retrieved(index: LshIndex, queries: Iterable) -> float:
    fr = [index.fraction_retrieved(q) for q in queries]
    if not fr:
        raise InvalidParams("query set is empty")
    return float(np.mean(fr))


class _Reader:
    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def _need(self, n: int, what: str) -> None:
        if self.pos + n > len(self.data):
            raise DatasetFormatError(f"snapshot truncated at byte {self.pos} while reading {what}")

    def unpack(self, fmt: str, what: str):
        n = struct.calcsize(fmt)
        self._need(n, what)
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += n
        return vals

    def array(self, count: int, what: str) -> NDArray[np.int64]:
        n = 8 * count
        self._need(n, what)
        arr = np.frombuffer(self.data, dtype="<i8", count=count, offset=self.pos).astype(np.int64)
        self.pos += n
        return arr


def _codes(X: NDArray[np.float64], ens: ProjectionEnsemble, params: CodingParams) -> NDArray[np.int64]:
    offsets = ens.offsets if params.scheme is Scheme.UQ_OFFSET else None
    return quantize(X @ ens.entries, params.w, offsets)


def _as_row(q, dim: int) -> NDArray[np.float64]:
    values = q.values if isinstance(q, DataVector) else np.asarray(q, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] != dim:
        raise DimensionMismatch(f"query has shape {values.shape}, index expects dimension {dim}")
    return values[None, :]


def _check_unit_rows(X: NDArray[np.float64]) -> None:
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > _UNIT_TOL)
    if bad.size:
        raise InvalidParams(f"row {int(bad[0])} has norm {norms[bad[0]]:.6g}; normalize the data first")
