"""Uniform partition of [0,1]^d into M^d cubes and its flat (mixed-radix) index.

All indices are 1-based.  Points may be floats or ``fractions.Fraction``;
bin membership and centers are computed exactly, so partitions with far
more bins than a float can resolve (M ~ e^100) still behave correctly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class Partition:
    M: int
    d: int = 1

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")

    @property
    def n_bins(self) -> int:
        return self.M ** self.d

    @property
    def width(self) -> Fraction:
        return Fraction(1, self.M)

    def _check(self, idx: Sequence[int]) -> None:
        if len(idx) != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {len(idx)}")
        for i in idx:
            if not 1 <= i <= self.M:
                raise ValueError(f"bin coordinate {i} outside [1, {self.M}]")


def gamma(p: Partition, idx: Sequence[int]) -> int:
    p._check(idx)
    m = 0
    for i in idx:
        m = m * p.M + (i - 1)
    return m + 1


def gamma_inv(p: Partition, m: int) -> tuple[int, ...]:
    if not 1 <= m <= p.n_bins:
        raise ValueError(f"flat index {m} outside [1, {p.n_bins}]")
    rest = m - 1
    coords = []
    for _ in range(p.d):
        rest, r = divmod(rest, p.M)
        coords.append(r + 1)
    return tuple(reversed(coords))


def bin_of(p: Partition, s: Sequence) -> tuple[int, ...]:
    """Half-open bins [a, b); the last bin in each direction is closed."""
    if len(s) != p.d:
        raise ValueError(f"expected a point in dimension {p.d}")
    out = []
    for sj in s:
        sj = Fraction(sj)
        if not 0 <= sj <= 1:
            raise ValueError(f"point coordinate {float(sj)} outside [0, 1]")
        out.append(min(math.floor(sj * p.M) + 1, p.M))
    return tuple(out)


def bin_center_exact(p: Partition, idx: Sequence[int]) -> tuple[Fraction, ...]:
    p._check(idx)
    return tuple(Fraction(2 * i - 1, 2 * p.M) for i in idx)


def bin_center(p: Partition, idx: Sequence[int]) -> tuple[float, ...]:
    return tuple(float(c) for c in bin_center_exact(p, idx))


def linf_distance(a: Sequence, b: Sequence) -> Fraction:
    return max(abs(Fraction(x) - Fraction(y)) for x, y in zip(a, b))
