"""Unit normalization, seeded Gaussian projections and the correlated-pair sampler."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .coding import Scheme
from .errors import DimensionMismatch, InvalidParams, ZeroVector

# |norm - 1| below this is treated as already unit, which makes normalize idempotent.
_UNIT_SLACK = 1e-14


def _readonly(a: NDArray) -> NDArray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DataVector:
    """An identified dense vector. Use :func:`normalize` to build unit ones."""

    id: int
    values: NDArray[np.float64]

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class ProjectionEnsemble:
    """A ``D x (K*L)`` Gaussian matrix split into L groups of K directions.

    Column ``table * K + slot`` holds hash direction ``slot`` of table
    ``table``. ``offsets`` is populated only for the offset scheme.
    ``unit_offsets`` are the underlying uniform[0, 1) draws, always present,
    so ensembles that differ only in scheme or w share their randomness.
    """

    dim_in: int
    num_tables: int
    hashes_per_table: int
    scheme: Scheme
    w: float
    seed: int
    entries: NDArray[np.float64] = field(repr=False)
    unit_offsets: NDArray[np.float64] = field(repr=False)
    offsets: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def num_hashes(self) -> int:
        return self.num_tables * self.hashes_per_table


@dataclass(frozen=True, eq=False)
class ProjectedPoint:
    id: int
    coords: NDArray[np.float64]


def normalize(v, id: int = 0) -> DataVector:
    """Scale ``v`` to unit l2 norm.

    ``v`` may be a raw sequence or a :class:`DataVector` (its id is kept).

    Raises:
        ZeroVector: every entry is zero.
        InvalidParams: empty input or non-finite entries.
    """
    if isinstance(v, DataVector):
        id = v.id
        v = v.values
    arr = np.array(v, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise InvalidParams("vector must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams("vector entries must be finite")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ZeroVector("cannot normalize an all-zero vector")
    if abs(norm - 1.0) > _UNIT_SLACK:
        arr = arr / norm
    return DataVector(int(id), _readonly(arr))


def normalize_rows(X) -> NDArray[np.float64]:
    """Row-wise :func:`normalize` for a 2-D array; returns a new array."""
    X = np.array(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise InvalidParams(f"expected a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidParams("vector entries must be finite")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        row = int(np.flatnonzero(norms == 0.0)[0])
        raise ZeroVector(f"row {row} is all zeros")
    scale = np.where(np.abs(norms - 1.0) > _UNIT_SLACK, norms, 1.0)
    return X / scale[:, None]


def direction_streams(dim_in: int, hashes_per_table: int, num_tables: int, seed: int):
    """Draw the Gaussian columns and unit offsets for every hash function.

    Hash function ``(table, slot)`` gets its own generator seeded from
    ``SeedSequence(seed, spawn_key=(table, slot))``. It first draws one
    uniform[0, 1) offset, then ``dim_in`` standard normals. A function's draws
    therefore depend only on ``(seed, table, slot, dim_in)``: growing K or L
    extends an ensemble without changing the existing columns.

    Returns:
        ``(entries, unit_offsets)`` with shapes ``(D, K*L)`` and ``(K*L,)``.
    """
    _check_positive_int(dim_in=dim_in, hashes_per_table=hashes_per_table, num_tables=num_tables)
    seed = _check_seed(seed)
    k = hashes_per_table * num_tables
    entries = np.empty((dim_in, k), dtype=np.float64)
    unit = np.empty(k, dtype=np.float64)
    for table in range(num_tables):
        for slot in range(hashes_per_table):
            col = table * hashes_per_table + slot
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(table, slot)))
            unit[col] = rng.random()
            entries[:, col] = rng.standard_normal(dim_in)
    return entries, unit


def scale_offsets(unit_offsets: NDArray[np.float64], w: float) -> NDArray[np.float64]:
    """Map uniform[0, 1) draws onto [0, w), guarding against rounding up to w."""
    return np.minimum(w * unit_offsets, np.nextafter(w, 0.0))


def generate_ensemble(
    D: int, K: int, L: int, scheme: Scheme | str, w: float, seed: int
) -> ProjectionEnsemble:
    """Build the projection ensemble for a (K, L) index with bin width ``w``."""
    scheme = Scheme.parse(scheme)
    _check_positive_int(D=D, K=K, L=L)
    if not (np.isfinite(w) and w > 0):
        raise InvalidParams(f"w must be positive, got {w}")
    entries, unit = direction_streams(D, K, L, seed)
    offsets = None
    if scheme is Scheme.UQ_OFFSET:
        offsets = _readonly(scale_offsets(unit, float(w)))
    return ProjectionEnsemble(
        dim_in=D,
        num_tables=L,
        hashes_per_table=K,
        scheme=scheme,
        w=float(w),
        seed=int(seed),
        entries=_readonly(entries),
        unit_offsets=_readonly(unit),
        offsets=offsets,
    )


def project(v: DataVector, e: ProjectionEnsemble) -> ProjectedPoint:
    if v.dim != e.dim_in:
        raise DimensionMismatch(f"vector has dimension {v.dim}, ensemble expects {e.dim_in}")
    return ProjectedPoint(v.id, _readonly(v.values @ e.entries))


def project_rows(X: NDArray[np.float64], e: ProjectionEnsemble) -> NDArray[np.float64]:
    """Project every row of ``X``; returns an ``(n, K*L)`` array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != e.dim_in:
        raise DimensionMismatch(f"rows have shape {X.shape}, ensemble expects dimension {e.dim_in}")
    return X @ e.entries


def sample_correlated_pair(rho: float, n: int, seed: int):
    """Draw ``n`` standard bivariate normal pairs with correlation ``rho``.

    ``y = rho * x + sqrt(1 - rho^2) * z`` with ``x, z`` independent N(0, 1).
    This is the joint law of one projected coordinate of two unit vectors
    whose dot product is ``rho``.
    """
    if not (-1.0 <= rho <= 1.0):
        raise InvalidParams(f"rho must lie in [-1, 1], got {rho}")
    if n < 1:
        raise InvalidParams(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(_check_seed(seed))
    x = rng.standard_normal(n)
    z = rng.standard_normal(n)
    y = rho * x + np.sqrt((1.0 - rho) * (1.0 + rho)) * z
    return x, y


def _check_positive_int(**kwargs: int) -> None:
    for name, value in kwargs.items():
        if int(value) != value or value < 1:
            raise InvalidParams(f"{name} must be a positive integer, got {value}")


def _check_seed(seed: int) -> int:
    if int(seed) != seed or not (0 <= seed < 2**64):
        raise InvalidParams(f"seed must be an integer in [0, 2**64), got {seed}")
    return int(seed)
