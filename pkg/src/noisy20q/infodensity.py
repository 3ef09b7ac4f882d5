"""Information densities and their per-bin running sums."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import MdChannel


@dataclass(frozen=True)
class DensityParams:
    """Input law Bern(p) and the channel evaluated at query size ``size``.

    The decoder of the adaptive procedure uses ``p = size = q``: the
    channel law it assumes is the one for a query of nominal size q.
    """

    p: float
    size: float
    channel: MdChannel

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"input parameter p={self.p} outside (0, 1)")
        mat = self.channel.matrix(self.size)
        marg = (1.0 - self.p) * mat[0] + self.p * mat[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            table = np.where(marg > 0, np.log(mat / marg), np.nan)
        object.__setattr__(self, "_matrix", mat)
        object.__setattr__(self, "_marginal", marg)
        object.__setattr__(self, "_table", table)

    @property
    def marginal(self) -> np.ndarray:
        return self._marginal.copy()

    @property
    def table(self) -> np.ndarray:
        """``table[x, y]`` is the single-step density; -inf where P(y|x) = 0."""
        return self._table.copy()

    def mutual_information(self) -> float:
        """Mean density under (X, Y) ~ Bern(p) x P(.|.), by enumeration."""
        px = np.array([1.0 - self.p, self.p])
        joint = px[:, None] * self._matrix
        mask = joint > 0
        return float(np.sum(joint[mask] * self._table[mask]))


def info_density(params: DensityParams, x: int, y: int) -> float:
    marg = params._marginal[y]
    if marg <= 0:
        raise ValueError(f"output {y} has zero marginal probability")
    cond = params._matrix[x, y]
    if cond == 0:
        return -math.inf
    return math.log(cond / marg)


def weighted_sum(counts: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sum of ``counts * values`` over the last axis with 0 * -inf taken as 0."""
    counts = np.asarray(counts)
    with np.errstate(invalid="ignore"):
        terms = np.where(counts > 0, counts * values, 0.0)
    return terms.sum(axis=-1)


class DensityAccumulator:
    """Running densities of all bins, kept as integer counters.

    ``ones[m, y]`` counts the steps with response y on which bin m carried
    bit 1; ``n_y[y]`` counts all steps with response y.  The accumulated
    density of bin m is then a fixed linear form in these counters, so no
    per-step history is stored.
    """

    def __init__(self, params: DensityParams, n_bins: int, lam: float):
        self.params = params
        self.lam = float(lam)
        self.n_bins = int(n_bins)
        ny = params.channel.n_outputs
        self.ones = np.zeros((self.n_bins, ny), dtype=np.int64)
        self.n_y = np.zeros(ny, dtype=np.int64)
        self._i0 = params._table[0]
        self._i1 = params._table[1]

    @property
    def n_total(self) -> int:
        return int(self.n_y.sum())

    def accumulate(self, column: np.ndarray, y: int) -> None:
        column = np.asarray(column)
        if column.shape != (self.n_bins,):
            raise ValueError(f"design column must have {self.n_bins} entries")
        self.ones[:, y] += column.astype(np.int64)
        self.n_y[y] += 1

    def densities(self) -> np.ndarray:
        zeros = self.n_y[None, :] - self.ones
        return weighted_sum(self.ones, self._i1) + weighted_sum(zeros, self._i0)

    def max_bin(self) -> tuple[int, float]:
        """(1-based flat index, value) of the largest density; ties go to the larger index."""
        if self.n_total == 0:
            raise ValueError("no accumulation step taken yet")
        dens = self.densities()
        best = dens.max()
        idx = int(np.flatnonzero(dens == best)[-1])
        return idx + 1, float(best)

    def decode(self) -> int | None:
        """Largest 1-based flat index whose density reaches the threshold."""
        hits = np.flatnonzero(self.densities() >= self.lam)
        return int(hits[-1]) + 1 if len(hits) else None


def accumulate(acc: DensityAccumulator, design_column, y: int) -> DensityAccumulator:
    acc.accumulate(design_column, y)
    return acc


def max_bin(acc: DensityAccumulator) -> tuple[int, float]:
    return acc.max_bin()
