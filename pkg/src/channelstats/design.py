"""Channel designs: which items go into which basket.

A design is a channels x groups matrix of nonnegative integer counts; row
``i`` lists how many items of each group were summed into channel ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from channelstats.model import RandomSource

__all__ = [
    "ChannelDesign",
    "DesignDiagnostics",
    "DesignRecipe",
    "balanced_typical",
    "biased_typical",
    "coinflip_counts",
    "stack",
    "design_diagnostics",
    "exact_determinant",
    "exact_rank",
]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class ChannelDesign:
    """Immutable integer count matrix (rows are channels, columns groups)."""

    __slots__ = ("_counts",)

    def __init__(self, counts):
        arr = np.asarray(counts)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("design must be a nonempty 2-D matrix")
        if arr.dtype.kind == "f":
            if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
                raise ValueError("design counts must be integers")
        elif arr.dtype.kind not in "iu":
            raise ValueError("design counts must be integers")
        arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise ValueError("design counts must be nonnegative")
        arr.setflags(write=False)
        self._counts = arr

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def shape(self) -> tuple[int, int]:
        return self._counts.shape

    @property
    def n_channels(self) -> int:
        return self._counts.shape[0]

    @property
    def n_groups(self) -> int:
        return self._counts.shape[1]

    @property
    def row_totals(self) -> np.ndarray:
        return self._counts.sum(axis=1)

    def to_list(self) -> list[list[int]]:
        return self._counts.tolist()

    def __eq__(self, other):
        if not isinstance(other, ChannelDesign):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._counts, other._counts))

    def __hash__(self):
        return hash((self.shape, self._counts.tobytes()))

    def __repr__(self):
        return f"ChannelDesign({self.to_list()})"


def balanced_typical(n: int) -> ChannelDesign:
    """Two baskets of ``n`` coin-flip items at their typical imbalance.

    Basket 1 holds ``n/2 + sqrt(n)`` items of group 0, basket 2 the mirror
    image. The group-0 count is rounded half-up and the other count is
    ``n`` minus it, so every row sums to ``n`` exactly.
    """
    n = int(n)
    if n < 4:
        raise ValueError(f"balanced_typical needs n >= 4, got {n}")
    a1 = _round_half_up(n / 2 + math.sqrt(n))
    o1 = n - a1
    return ChannelDesign([[a1, o1], [o1, a1]])


def biased_typical(n: int, p: float) -> ChannelDesign:
    """Typical counts when basket 1 takes group 0 with probability ``p``
    and basket 2 is filled the opposite way."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    a1 = _round_half_up(n * p)
    return ChannelDesign([[a1, n - a1], [n - a1, a1]])


def coinflip_counts(n: int, p: float, rng: RandomSource) -> ChannelDesign:
    """Random two-basket design: each basket gets ``n`` independent flips.

    Basket 1 takes a group-0 item on heads, basket 2 on tails.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    a1 = int(rng.generator.binomial(n, p))
    a2 = int(rng.generator.binomial(n, 1.0 - p))
    return ChannelDesign([[a1, n - a1], [a2, n - a2]])


def stack(designs: Sequence[ChannelDesign]) -> ChannelDesign:
    """Concatenate designs row-wise (repeated measurements)."""
    designs = list(designs)
    if not designs:
        raise ValueError("nothing to stack")
    k = designs[0].n_groups
    for d in designs[1:]:
        if d.n_groups != k:
            raise ValueError(f"cannot stack designs with {k} and {d.n_groups} groups")
    return ChannelDesign(np.vstack([d.counts for d in designs]))


def _as_int_rows(counts) -> list[list[int]]:
    if isinstance(counts, ChannelDesign):
        counts = counts.counts
    return [[int(x) for x in row] for row in np.asarray(counts).tolist()]


def exact_determinant(counts) -> int:
    """Determinant of a square integer matrix by fraction-free (Bareiss) elimination."""
    m = _as_int_rows(counts)
    k = len(m)
    if any(len(row) != k for row in m):
        raise ValueError("determinant needs a square matrix")
    sign = 1
    prev = 1
    for i in range(k - 1):
        if m[i][i] == 0:
            swap = next((r for r in range(i + 1, k) if m[r][i] != 0), None)
            if swap is None:
                return 0
            m[i], m[swap] = m[swap], m[i]
            sign = -sign
        for r in range(i + 1, k):
            for c in range(i + 1, k):
                m[r][c] = (m[r][c] * m[i][i] - m[r][i] * m[i][c]) // prev
        prev = m[i][i]
    return sign * m[k - 1][k - 1]


def exact_rank(counts) -> int:
    """Rank by Gaussian elimination over the rationals."""
    m = [[Fraction(x) for x in row] for row in _as_int_rows(counts)]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    rank = 0
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r][c] != 0), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        for r in range(rank + 1, rows):
            f = m[r][c] / m[rank][c]
            if f:
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
        if rank == rows:
            break
    return rank


@dataclass(frozen=True)
class DesignDiagnostics:
    rank: int
    determinant: int | None
    condition_estimate: float

    def as_dict(self) -> dict:
        return {"rank": self.rank, "determinant": self.determinant,
                "condition_estimate": self.condition_estimate}


def design_diagnostics(d: ChannelDesign) -> DesignDiagnostics:
    """Exact rank and determinant plus a singular-value condition estimate.

    ``condition_estimate`` is ``inf`` whenever the exact rank is below
    ``min(shape)``.
    """
    rank = exact_rank(d)
    det = exact_determinant(d) if d.n_channels == d.n_groups else None
    if rank < min(d.shape):
        cond = math.inf
    else:
        s = np.linalg.svd(d.counts.astype(float), compute_uv=False)
        cond = float(s[0] / s[-1])
    return DesignDiagnostics(rank, det, cond)


@dataclass(frozen=True)
class DesignRecipe:
    """How to build a design: a named constructor or an explicit matrix.

    Recipes let a sweep rebuild the design at each basket size. Coin-flip
    recipes draw their counts from a dedicated substream (see
    :data:`DESIGN_SUBSTREAM`).
    """

    constructor: str
    n: int | None = None
    p: float | None = None
    matrix: tuple[tuple[int, ...], ...] | None = None

    CONSTRUCTORS = ("balanced", "biased", "coinflip", "explicit")

    def __post_init__(self):
        if self.constructor not in self.CONSTRUCTORS:
            raise ValueError(f"unknown design constructor {self.constructor!r}")
        if self.constructor == "explicit":
            if self.matrix is None:
                raise ValueError("explicit design needs a matrix")
            ChannelDesign(self.matrix)
        else:
            if self.n is None:
                raise ValueError(f"{self.constructor} design needs n")
            if self.constructor in ("biased", "coinflip") and self.p is None:
                raise ValueError(f"{self.constructor} design needs p")

    def build(self, master_seed: int = 0, n: int | None = None, block: int = 0) -> ChannelDesign:
        n = self.n if n is None else n
        if self.constructor == "explicit":
            if n is not None and n != self.n:
                raise ValueError("an explicit design matrix cannot be resized")
            return ChannelDesign(self.matrix)
        if self.constructor == "balanced":
            return balanced_typical(n)
        if self.constructor == "biased":
            return biased_typical(n, self.p)
        return coinflip_counts(n, self.p, RandomSource(master_seed, DESIGN_SUBSTREAM + block))


# Substreams at and above this index are reserved for drawing random
# designs; replicate substreams stay far below it.
DESIGN_SUBSTREAM = 2**62
