"""Scalar quantizers turning projected coordinates into integer bucket codes.

Both quantizers use the mathematical floor (toward -inf). A value sitting
exactly on a bin edge goes to the upper bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import NDArray

from .errors import IndexOutOfRange, InvalidParams

if TYPE_CHECKING:
    from .projections import ProjectedPoint, ProjectionEnsemble

_INT64_MAX = float(2**63 - 1)


class Scheme(str, Enum):
    UQ = "uq"
    UQ_OFFSET = "uq-offset"

    @classmethod
    def parse(cls, value: "Scheme | str") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise InvalidParams(f"unknown scheme {value!r}; expected 'uq' or 'uq-offset'")


@dataclass(frozen=True)
class CodingParams:
    scheme: Scheme
    w: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        _check_w(self.w)
        object.__setattr__(self, "w", float(self.w))


def _check_w(w: float) -> None:
    if not (math.isfinite(w) and w > 0):
        raise InvalidParams(f"bin width w must be positive and finite, got {w}")


def _floor_code(v: float) -> int:
    if not math.isfinite(v) or abs(v) >= _INT64_MAX:
        raise InvalidParams(f"code for {v} overflows a signed 64-bit integer")
    return math.floor(v)


def code_uq(x: float, w: float) -> int:
    """Return ``floor(x / w)``."""
    _check_w(w)
    if not math.isfinite(x):
        raise InvalidParams(f"coordinate must be finite, got {x}")
    return _floor_code(x / w)


def code_uq_offset(x: float, w: float, q: float) -> int:
    """Return ``floor((x + q) / w)`` for an offset ``q`` in [0, w)."""
    _check_w(w)
    if not (0.0 <= q < w):
        raise InvalidParams(f"offset must lie in [0, w={w}), got {q}")
    if not math.isfinite(x):
        raise InvalidParams(f"coordinate must be finite, got {x}")
    return _floor_code((x + q) / w)


def quantize(coords: NDArray[np.float64], w: float, offsets: NDArray[np.float64] | None = None) -> NDArray[np.int64]:
    """Vectorized quantizer; ``offsets`` broadcasts against the last axis.

    Matches :func:`code_uq` / :func:`code_uq_offset` elementwise.
    """
    _check_w(w)
    coords = np.asarray(coords, dtype=np.float64)
    if offsets is not None:
        coords = coords + offsets
    if not np.all(np.isfinite(coords)):
        raise InvalidParams("coordinates must be finite")
    q = np.floor(coords / w)
    if q.size and np.max(np.abs(q)) > _INT64_MAX:
        raise InvalidParams("codes overflow a signed 64-bit integer")
    return q.astype(np.int64)


def code_point(
    p: "ProjectedPoint", e: "ProjectionEnsemble", params: CodingParams, table: int
) -> tuple[int, ...]:
    """The K-code key of ``p`` in hash table ``table``."""
    K, L = e.hashes_per_table, e.num_tables
    if not (0 <= table < L):
        raise IndexOutOfRange(f"table {table} outside [0, {L})")
    lo, hi = table * K, (table + 1) * K
    offsets = None
    if params.scheme is Scheme.UQ_OFFSET:
        if e.offsets is None:
            raise InvalidParams("ensemble was generated without offsets")
        offsets = e.offsets[lo:hi]
    return tuple(int(c) for c in quantize(p.coords[lo:hi], params.w, offsets))
