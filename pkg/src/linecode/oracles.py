"""Independent checks of the rank-tail and density lemmas on small instances.

Exhaustive enumeration where ``2**(entries)`` stays within ``EXACT_BUDGET``,
Monte Carlo with Wilson intervals elsewhere.  The closed forms here
(full-rank probability, single-link mean delay) are computed by separate
arithmetic and never call the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import chisquare

from .gf2 import BitMatrix, XorBasis, batch_rank, pack_bits, random_words
from .stats import Proportion, proportion

EXACT_BUDGET = 1 << 20
DENSITY_EXACT_BITS = 16
_CHUNK = 1 << 18

VERTICAL = "vertical"
HORIZONTAL = "horizontal"
FILLERS = ("zero", "independent", "copied")


# plain dense matrices ----------------------------------------------------------


def exact_rank_tail(n: int, k: int) -> Fraction:
    """``Pr{rank < k}`` over all ``n x k`` GF(2) matrices, by enumeration.

    Uses duality instead of elimination: the rows miss full rank exactly when
    some nonzero ``y`` is orthogonal to all of them.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    if n * k > 20:
        raise ValueError(f"{n}x{k} needs 2**{n * k} matrices; budget is 2**20")
    if k > n:
        return Fraction(1)
    # ortho[v] has bit y set when popcount(v & y) is even
    ortho = np.zeros(1 << k, dtype=np.uint64)
    for v in range(1 << k):
        ortho[v] = sum(1 << y for y in range(1 << k) if bin(v & y).count("1") % 2 == 0)
    nonzero_y = np.uint64(((1 << (1 << k)) - 1) ^ 1)
    total = 1 << (n * k)
    mask = np.int64((1 << k) - 1)
    shifts = np.arange(n, dtype=np.int64) * k
    deficient = 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        rows = (idx[:, None] >> shifts) & mask
        common = np.bitwise_and.reduce(ortho[rows], axis=1)
        deficient += int(np.count_nonzero(common & nonzero_y))
    return Fraction(deficient, total)


def full_rank_probability(n: int, k: int) -> Fraction:
    """``prod_{i<k} (1 - 2**(i-n))``: chance an ``n x k`` uniform matrix has rank k."""
    if k > n:
        return Fraction(0)
    out = Fraction(1)
    for i in range(k):
        out *= 1 - Fraction(1, 2 ** (n - i))
    return out


def mc_rank_tail(
    n: int,
    k: int,
    trials: int,
    rng: np.random.Generator,
    confidence: float = 0.999,
    batch: int = 10_000,
) -> Proportion:
    if trials < 1:
        raise ValueError("trials must be positive")
    hits = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        hits += int(np.count_nonzero(batch_rank(random_words((b, n), k, rng), k) < k))
        done += b
    return proportion(hits, trials, confidence)


def dense_single_link_mean_delay(k: int, p: float = 1.0) -> float:
    """Mean slots for a lossless-slot dense code on one link: ``sum_j 1/(1-2**(j-k))`` over ``p``."""
    return sum(1 / (1 - 2.0 ** (j - k)) for j in range(k)) / p


# random block lower-triangular matrices ----------------------------------------


@dataclass(frozen=True)
class RbltParams:
    w_star: int
    r_star: int
    r_l: tuple[int, ...]
    orientation: str = VERTICAL
    filler: str = "zero"

    def __post_init__(self) -> None:
        object.__setattr__(self, "r_l", tuple(int(x) for x in self.r_l))
        if self.w_star < 1 or self.r_star < 1:
            raise ValueError("w_star and r_star must be positive")
        if len(self.r_l) != self.w_star:
            raise ValueError(f"{len(self.r_l)} column widths for {self.w_star} blocks")
        if self.filler not in FILLERS:
            raise ValueError(f"filler must be one of {FILLERS}")
        if self.orientation == VERTICAL:
            if any(not 0 <= r <= self.r_star for r in self.r_l):
                raise ValueError("vertical RBLT needs 0 <= r_l <= r_star")
        elif self.orientation == HORIZONTAL:
            if any(r < self.r_star for r in self.r_l):
                raise ValueError("horizontal RBLT needs r_l >= r_star")
        else:
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.w_star * self.r_star, sum(self.r_l)

    @property
    def n_star(self) -> int:
        if self.orientation == VERTICAL:
            return sum(self.r_l)
        return self.w_star * self.r_star


@dataclass(frozen=True)
class RbltBound:
    n_star: int
    u_star: float
    r_min: int
    r_max: int
    gamma: int
    value: float

    @property
    def vacuous(self) -> bool:
        return self.value >= 1


def _rblt_bits(params: RbltParams, batch: int, rng: np.random.Generator) -> np.ndarray:
    rows, cols = params.shape
    r = params.r_star
    offs = np.concatenate(([0], np.cumsum(params.r_l)))
    m = rng.integers(0, 2, size=(batch, rows, cols), dtype=np.uint8)
    for i in range(params.w_star):
        for j in range(i + 1, params.w_star):
            blk = (slice(None), slice(i * r, (i + 1) * r), slice(offs[j], offs[j + 1]))
            if params.filler == "zero":
                m[blk] = 0
            elif params.filler == "copied":
                m[blk] = m[:, j * r : (j + 1) * r, offs[j] : offs[j + 1]]
    return m


def build_rblt(params: RbltParams, rng: np.random.Generator) -> BitMatrix:
    """Dense blocks on and below the block diagonal, filler above it."""
    return BitMatrix.from_array(_rblt_bits(params, 1, rng)[0])


def rblt_tail_bound(params: RbltParams, gamma: int) -> RbltBound:
    """Closed-form bound on ``Pr{rank(T) < n_star - gamma}``."""
    n = params.n_star
    if not 0 <= gamma <= n - 1:
        raise ValueError(f"gamma must lie in [0, {n - 1}]")
    w, r = params.w_star, params.r_star
    rmin, rmax = min(params.r_l), max(params.r_l)
    if params.orientation == VERTICAL:
        if rmin == 0:
            return RbltBound(n, math.inf, rmin, rmax, gamma, math.inf)
        u = math.ceil((n - gamma) / rmin)
        expo = -gamma + n - w * r + (r - rmin) * (u - 1)
        value = u * (1 - 2.0**-rmax) * 2.0**expo
    else:
        u = math.ceil((n - gamma) / r)
        expo = -gamma + n - w * rmin + (rmin - r) * (u - 1)
        value = u * (1 - 2.0**-r) * 2.0**expo
    return RbltBound(n, u, rmin, rmax, gamma, value)


def mc_rblt_tail(
    params: RbltParams,
    gamma: int,
    trials: int,
    rng: np.random.Generator,
    confidence: float = 0.999,
    batch: int = 20_000,
) -> Proportion:
    if trials < 1:
        raise ValueError("trials must be positive")
    _, cols = params.shape
    target = params.n_star - gamma
    hits = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        ranks = batch_rank(pack_bits(_rblt_bits(params, b, rng)), cols)
        hits += int(np.count_nonzero(ranks < target))
        done += b
    return proportion(hits, trials, confidence)


def rblt_tail_counts(params: RbltParams, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Histogram of ranks over ``trials`` sampled matrices (index = rank)."""
    rows, cols = params.shape
    counts = np.zeros(min(rows, cols) + 1, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(20_000, trials - done)
        ranks = batch_rank(pack_bits(_rblt_bits(params, b, rng)), cols)
        counts += np.bincount(ranks, minlength=counts.size)
        done += b
    return counts


# density transfer --------------------------------------------------------------


@dataclass(frozen=True)
class DensityCheck:
    passed: bool
    gamma: int
    exhaustive: bool
    counts: tuple[int, ...]
    statistic: float
    p_value: float


def independent_rows(t: BitMatrix, gamma: int | None = None) -> list[int]:
    """Indices of the first linearly independent rows of ``t`` (at most ``gamma``)."""
    basis = XorBasis()
    picked = []
    for i, v in enumerate(t.row_ints()):
        if gamma is not None and len(picked) == gamma:
            break
        if basis.insert(v):
            picked.append(i)
    return picked


def density_transfer_check(
    rows_T: int,
    cols_T: int,
    trials: int,
    rng: np.random.Generator,
    *,
    T: BitMatrix | None = None,
    cols_q: int = 2,
    gamma: int | None = None,
    significance: float = 1e-3,
) -> DensityCheck:
    """Are ``gamma`` rows of ``T @ Q`` picked by independent rows of ``T`` jointly uniform?

    ``Q`` is a uniform ``cols_T x cols_q`` matrix.  When ``2**(cols_T*cols_q)``
    fits in the exact budget every ``Q`` is enumerated and the outcome counts
    must be exactly equal; otherwise ``trials`` samples go through a
    chi-square test at ``significance``.
    """
    if max(rows_T, cols_T, cols_q) > 12 or min(rows_T, cols_T, cols_q) < 1:
        raise ValueError("dimensions must lie in [1, 12]")
    if T is None:
        T = BitMatrix.random(rows_T, cols_T, rng)
    elif T.shape != (rows_T, cols_T):
        raise ValueError(f"T has shape {T.shape}, expected {(rows_T, cols_T)}")
    picked = independent_rows(T, gamma)
    g = len(picked)
    if gamma is not None and g < gamma:
        raise ValueError(f"T has rank {g} < gamma = {gamma}")
    if g == 0:
        raise ValueError("T has rank 0")
    n_out = 1 << (g * cols_q)
    if n_out > 1 << 14:
        raise ValueError("too many joint outcomes for the test budget")
    sel = T.to_array()[picked].astype(np.int64)
    weights = (1 << np.arange(g * cols_q, dtype=np.int64)).reshape(g, cols_q)

    exhaustive = cols_T * cols_q <= DENSITY_EXACT_BITS
    if exhaustive:
        total = 1 << (cols_T * cols_q)
        idx = np.arange(total, dtype=np.int64)
        bits = (idx[:, None] >> np.arange(cols_T * cols_q)) & 1
        qs = bits.reshape(total, cols_T, cols_q)
    else:
        if trials < 5 * n_out:
            raise ValueError(f"need at least {5 * n_out} trials for the chi-square test")
        qs = rng.integers(0, 2, size=(trials, cols_T, cols_q), dtype=np.int64)
    prod = np.einsum("gc,bcj->bgj", sel, qs) & 1
    outcome = (prod * weights).sum(axis=(1, 2))
    counts = np.bincount(outcome, minlength=n_out)
    if exhaustive:
        ok = bool((counts == counts[0]).all())
        return DensityCheck(ok, g, True, tuple(int(c) for c in counts), 0.0, 1.0 if ok else 0.0)
    stat, pv = chisquare(counts)
    return DensityCheck(
        bool(pv >= significance), g, False, tuple(int(c) for c in counts), float(stat), float(pv)
    )


def grid_params(
    w_max: int = 3, r_max: int = 8, fillers: Sequence[str] = FILLERS
) -> list[RbltParams]:
    """Small RBLT configurations of both orientations."""
    out = []
    for w in range(1, w_max + 1):
        for r in range(2, r_max + 1, 3):
            narrow = tuple(max(1, r - (l % 3)) for l in range(w))
            wide = tuple(r + (l % 3) for l in range(w))
            for f in fillers:
                out.append(RbltParams(w, r, narrow, VERTICAL, f))
                out.append(RbltParams(w, r, wide, HORIZONTAL, f))
    return out
