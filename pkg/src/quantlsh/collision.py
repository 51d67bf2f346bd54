"""Collision probabilities of the two quantizers and the LSH gap statistic.

For unit vectors with correlation ``rho`` one projected coordinate pair is
standard bivariate normal with correlation ``rho``. Plain quantization
collides with probability

    P_uq = 2 * sum_{i>=0} int_{iw}^{(i+1)w} phi(z) [Phi(((i+1)w - rho z)/s) - Phi((iw - rho z)/s)] dz,

``s = sqrt(1 - rho^2)``, which is evaluated here by composite Gauss-Legendre
quadrature. The randomly offset quantizer has the closed form

    P_off = 2 Phi(t) - 1 - 2 / (sqrt(2 pi) t) * (1 - exp(-t^2 / 2)),   t = w / sqrt(2 (1 - rho)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .coding import Scheme, quantize
from .errors import CExceedsBound, DegenerateGap, InvalidParams
from .projections import sample_correlated_pair

DEFAULT_TOL = 1e-10
DEFAULT_W_GRID = tuple(0.25 * i for i in range(1, 33))
FIGURE_RHOS = (0.0, 0.25, 0.5, 0.75, 0.9, 0.99)

_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_RHO_ONE = 1.0 - 1e-9
# phi is below 1e-21 past here; integration ranges are clipped to it.
_Z_MAX = 10.0
_MAX_LEVELS = 16
_MC_SHARD = 1 << 20


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def normal_cdf(x: float) -> float:
    # erfc keeps full relative precision in the lower tail.
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _check_rho(rho: float) -> None:
    if not (0.0 <= rho <= 1.0):
        raise InvalidParams(f"rho must lie in [0, 1], got {rho}")


def _check_w(w: float) -> None:
    if not (math.isfinite(w) and w > 0):
        raise InvalidParams(f"w must be positive and finite, got {w}")


def _check_tol(tol: float) -> None:
    if not (tol > 0):
        raise InvalidParams(f"tol must be positive, got {tol}")


def num_bins(w: float, tol: float) -> int:
    """Number of nonnegative bins kept before truncating the series.

    The first ``I`` with ``2 * (1 - Phi(I * w)) < tol / 10``; the dropped
    bins hold at most that much probability mass.
    """
    i = 1
    while 2.0 * normal_cdf(-i * w) >= tol / 10.0:
        i += 1
    return i


def collision_prob_uq_rho0(w: float, bins: int | None = None) -> float:
    """Closed form at ``rho = 0``: ``2 * sum_i (Phi((i+1)w) - Phi(iw))^2``."""
    _check_w(w)
    if bins is None:
        bins = num_bins(w, 1e-16)
    edges = w * np.arange(bins + 1)
    mass = np.diff(ndtr(edges))
    return float(2.0 * np.sum(mass * mass))


def _gl_panels(a: np.ndarray, b: np.ndarray, panels: int):
    """Nodes and weights of a composite rule, one row per interval [a, b]."""
    h = (b - a) / panels
    starts = a[:, None] + h[:, None] * np.arange(panels)[None, :]
    z = starts[:, :, None] + (0.5 * h)[:, None, None] * (_GL_NODES + 1.0)[None, None, :]
    wts = (0.5 * h)[:, None, None] * _GL_WEIGHTS[None, None, :]
    return z, wts


def _integrate_uq(rho: float, w: float, tol: float, panel_scale: int = 1) -> float:
    bins = num_bins(w, tol)
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    lo = w * np.arange(bins, dtype=np.float64)
    hi = lo + w

    # Split each bin where the lower-edge term jumps, z = i w / rho.
    a_list, b_list, i_list = [], [], []
    for i in range(bins):
        a, b = lo[i], min(hi[i], _Z_MAX)
        if a >= b:
            continue
        cut = lo[i] / rho if rho > 0 else math.inf
        if a < cut < b:
            a_list += [a, cut]
            b_list += [cut, b]
            i_list += [i, i]
        else:
            a_list.append(a)
            b_list.append(b)
            i_list.append(i)
    a = np.array(a_list)
    b = np.array(b_list)
    idx = np.array(i_list)
    upper = (idx + 1) * w
    lower = idx * w

    def estimate(panels: int) -> np.ndarray:
        z, wts = _gl_panels(a, b, panels)
        f = np.exp(-0.5 * z * z) / _SQRT_2PI * (
            ndtr((upper[:, None, None] - rho * z) / s) - ndtr((lower[:, None, None] - rho * z) / s)
        )
        return np.sum(f * wts, axis=(1, 2))

    # Start with panels no wider than a quarter unit.
    panels = max(1, int(math.ceil(np.max(b - a) / 0.25))) * panel_scale
    prev = estimate(panels)
    budget = tol / max(1, len(a))
    for _ in range(_MAX_LEVELS):
        panels *= 2
        cur = estimate(panels)
        if np.max(np.abs(cur - prev)) < budget:
            prev = cur
            break
        prev = cur
    else:
        raise ArithmeticError(f"quadrature did not converge for rho={rho}, w={w}")
    return float(min(1.0, 2.0 * np.sum(prev)))


def collision_prob_uq(rho: float, w: float, tol: float = DEFAULT_TOL) -> float:
    """Collision probability of ``floor(x / w)`` at correlation ``rho``.

    Absolute error is at most ``tol``. ``rho == 0`` uses the closed form and
    ``rho`` within 1e-9 of one returns exactly 1.
    """
    _check_rho(rho)
    _check_w(w)
    _check_tol(tol)
    if rho > _RHO_ONE:
        return 1.0
    if rho == 0.0:
        return collision_prob_uq_rho0(w, num_bins(w, tol))
    return _integrate_uq(float(rho), float(w), float(tol))


def collision_prob_uq_offset(rho: float, w: float) -> float:
    """Collision probability of ``floor((x + q) / w)`` with ``q ~ U[0, w)``."""
    _check_rho(rho)
    _check_w(w)
    d = 2.0 * (1.0 - rho)
    if d == 0.0:
        return 1.0
    t = w / math.sqrt(d)
    # 2 Phi(t) - 1 == erf(t / sqrt 2); expm1 avoids cancellation for small t.
    p = math.erf(t / math.sqrt(2.0)) + 2.0 / (_SQRT_2PI * t) * math.expm1(-0.5 * t * t)
    return min(1.0, max(0.0, p))


def collision_prob(scheme: Scheme | str, rho: float, w: float, tol: float = DEFAULT_TOL) -> float:
    if Scheme.parse(scheme) is Scheme.UQ:
        return collision_prob_uq(rho, w, tol)
    return collision_prob_uq_offset(rho, w)


def max_c(rho0: float) -> float:
    """Largest admissible approximation factor, ``sqrt(1 / (1 - rho0))``."""
    if not (0.0 <= rho0 < 1.0):
        raise InvalidParams(f"rho0 must lie in [0, 1), got {rho0}")
    return math.sqrt(1.0 / (1.0 - rho0))


def gap(p1: float, p2: float) -> float:
    """``log(1/p1) / log(1/p2)``; smaller means a sharper hash family.

    ``p2 > p1`` is allowed and simply yields a gap above 1.
    """
    for name, p in (("p1", p1), ("p2", p2)):
        if not (0.0 < p < 1.0):
            raise DegenerateGap(f"{name}={p!r} must lie strictly inside (0, 1)")
    return math.log(p1) / math.log(p2)


@dataclass(frozen=True)
class GapResult:
    scheme: Scheme
    rho0: float
    c: float
    w: float
    p1: float
    p2: float
    gap: float

    @property
    def d0(self) -> float:
        return 2.0 * (1.0 - self.rho0)


def far_rho(rho0: float, c: float) -> float:
    """Correlation at squared distance ``c^2 * d0`` (clamped at 0 for rounding)."""
    rho_c = 1.0 - c * c * (1.0 - rho0)
    if -1e-12 < rho_c < 0.0:
        rho_c = 0.0
    return rho_c


def gap_at(scheme: Scheme | str, rho0: float, c: float, w: float, tol: float = DEFAULT_TOL) -> GapResult:
    scheme = Scheme.parse(scheme)
    if not (0.0 < rho0 < 1.0):
        raise InvalidParams(f"rho0 must lie in (0, 1), got {rho0}")
    if c < 1.0:
        raise InvalidParams(f"c must be >= 1, got {c}")
    bound = max_c(rho0)
    if c > bound * (1.0 + 1e-12):
        raise CExceedsBound(f"c={c} exceeds sqrt(1/(1-rho0))={bound:.6g} for rho0={rho0}")
    rho_c = far_rho(rho0, c)
    p1 = collision_prob(scheme, rho0, w, tol)
    p2 = p1 if c == 1.0 else collision_prob(scheme, rho_c, w, tol)
    return GapResult(scheme, float(rho0), float(c), float(w), p1, p2, gap(p1, p2))


def optimal_w(
    scheme: Scheme | str,
    rho0: float,
    c: float,
    w_grid: Sequence[float] = DEFAULT_W_GRID,
    tol: float = DEFAULT_TOL,
) -> tuple[float, GapResult]:
    """Grid point with the smallest gap; ties go to the smaller w.

    Grid points where a probability degenerates to 0 or 1 are skipped.
    """
    grid = [float(w) for w in w_grid]
    if not grid:
        raise InvalidParams("w_grid must be nonempty")
    if any(w <= 0 for w in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParams("w_grid must be positive and strictly increasing")
    best: GapResult | None = None
    for w in grid:
        try:
            res = gap_at(scheme, rho0, c, w, tol)
        except DegenerateGap:
            continue
        if best is None or res.gap < best.gap:
            best = res
    if best is None:
        raise DegenerateGap(f"every w in the grid gives a degenerate gap (rho0={rho0}, c={c})")
    return best.w, best


def _shard_seed(seed: int, shard: int) -> int:
    state = np.random.SeedSequence(seed, spawn_key=(shard,)).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def monte_carlo_collision(
    scheme: Scheme | str, rho: float, w: float, n: int, seed: int
) -> tuple[float, float]:
    """Empirical collision rate over ``n`` correlated pairs, with its standard error.

    Pairs are generated in fixed shards of 2**20, each seeded from
    ``(seed, shard)``, so the estimate does not depend on how shards are run.
    The offset scheme draws a fresh ``q ~ U[0, w)`` for every pair.
    """
    scheme = Scheme.parse(scheme)
    if n < 1000:
        raise InvalidParams(f"n must be >= 1000, got {n}")
    _check_w(w)
    if not (-1.0 <= rho <= 1.0):
        raise InvalidParams(f"rho must lie in [-1, 1], got {rho}")
    hits = 0
    for shard, start in enumerate(range(0, n, _MC_SHARD)):
        m = min(_MC_SHARD, n - start)
        sseed = _shard_seed(seed, shard)
        x, y = sample_correlated_pair(rho, m, sseed)
        q = None
        if scheme is Scheme.UQ_OFFSET:
            rng = np.random.default_rng(np.random.SeedSequence(sseed, spawn_key=(1,)))
            q = np.minimum(w * rng.random(m), np.nextafter(w, 0.0))
        hits += int(np.count_nonzero(quantize(x, w, q) == quantize(y, w, q)))
    p_hat = hits / n
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / n)


@dataclass(frozen=True)
class CurvePoint:
    scheme: Scheme
    rho: float
    w: float
    p: float


def curve_sweep(
    scheme: Scheme | str,
    rho_list: Iterable[float],
    w_grid: Iterable[float] = DEFAULT_W_GRID,
    tol: float = DEFAULT_TOL,
) -> list[CurvePoint]:
    """Collision probability for every (rho, w) cell, rho-major order."""
    scheme = Scheme.parse(scheme)
    rhos = [float(r) for r in rho_list]
    ws = [float(w) for w in w_grid]
    if not rhos or not ws:
        raise InvalidParams("rho_list and w_grid must be nonempty")
    return [CurvePoint(scheme, r, w, collision_prob(scheme, r, w, tol)) for r in rhos for w in ws]


def gap_sweep(
    scheme: Scheme | str,
    rho0: float,
    c_list: Iterable[float],
    w_grid: Iterable[float] = DEFAULT_W_GRID,
    tol: float = DEFAULT_TOL,
) -> list[GapResult]:
    """Gap for every admissible (c, w) cell, c-major order.

    Cells whose probabilities degenerate to 0 or 1 are left out.
    """
    scheme = Scheme.parse(scheme)
    rows = []
    for c in c_list:
        for w in w_grid:
            try:
                rows.append(gap_at(scheme, rho0, float(c), float(w), tol))
            except DegenerateGap:
                continue
    return rows
