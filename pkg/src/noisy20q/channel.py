"""Measurement-dependent channels.

A query set A is answered through a channel whose law depends on the
Lebesgue size |A| only.  Every channel here is addressed by that size:
``ch.matrix(size)`` is the 2 x |Y| transition matrix used to answer a query
of size ``size``.  The state map f turns the size into the channel state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ROW_TOL = 1e-12


class ChannelError(ValueError):
    """Invalid channel parameters or an out-of-range channel state."""


@dataclass(frozen=True)
class LipschitzFn:
    """Affine state map ``f(size) = a + b * size`` on [0, 1].

    A constant map is ``b == 0``.  The Lipschitz constant is ``|b|``.
    """

    a: float
    b: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ChannelError("state map coefficients must be finite")
        if self.min_value() < 0:
            raise ChannelError(f"state map {self} is negative somewhere on [0, 1]")

    @classmethod
    def constant(cls, alpha: float) -> "LipschitzFn":
        return cls(alpha, 0.0)

    @property
    def kind(self) -> str:
        return "constant" if self.b == 0 else "affine"

    @property
    def lipschitz(self) -> float:
        return abs(self.b)

    def __call__(self, size: float) -> float:
        if not 0.0 <= size <= 1.0:
            raise ChannelError(f"query size {size!r} outside [0, 1]")
        return self.a + self.b * size

    def max_value(self) -> float:
        return max(self.a, self.a + self.b)

    def min_value(self) -> float:
        return min(self.a, self.a + self.b)

    def is_increasing(self) -> bool:
        return self.b > 0

    def is_decreasing(self) -> bool:
        return self.b < 0


def eval_state(f: LipschitzFn, size: float) -> float:
    return f(size)


class MdChannel:
    """Base class: binary input, finite output alphabet, law indexed by query size."""

    family = "abstract"
    n_outputs = 2

    def matrix(self, size: float) -> np.ndarray:
        raise NotImplementedError

    def row(self, size: float, x: int) -> np.ndarray:
        if x not in (0, 1):
            raise ChannelError(f"channel input must be a bit, got {x!r}")
        return self.matrix(size)[x]

    def transition_prob(self, size: float, x: int, y: int) -> float:
        if not 0 <= y < self.n_outputs:
            raise ChannelError(f"unknown output symbol {y!r}")
        return float(self.row(size, x)[y])

    def sample(self, size: float, x: int, rng: np.random.Generator) -> int:
        """Draw one response by inverting the row CDF with a single uniform."""
        cdf = np.cumsum(self.row(size, x))
        y = int(np.searchsorted(cdf, rng.random(), side="right"))
        return min(y, self.n_outputs - 1)

    def is_binary_symmetric(self) -> bool:
        return False


@dataclass(frozen=True)
class MdBSC(MdChannel):
    """Binary symmetric channel with crossover ``nu * f(|A|)``."""

    nu: float
    f: LipschitzFn
    family = "mdbsc"
    n_outputs = 2

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ChannelError(f"nu={self.nu} outside (0, 1]")
        # reject, never clamp: crossover above 1/2 is not a usable channel
        if self.nu * self.f.max_value() > 0.5 + 1e-15:
            raise ChannelError(
                f"nu * max f = {self.nu * self.f.max_value():.6g} exceeds 1/2"
            )

    def crossover(self, size: float) -> float:
        return self.nu * self.f(size)

    def matrix(self, size: float) -> np.ndarray:
        p = self.crossover(size)
        return np.array([[1.0 - p, p], [p, 1.0 - p]])

    def transition_prob(self, size: float, x: int, y: int) -> float:
        if x not in (0, 1):
            raise ChannelError(f"channel input must be a bit, got {x!r}")
        if y not in (0, 1):
            raise ChannelError(f"unknown output symbol {y!r}")
        p = self.crossover(size)
        return p if x != y else 1.0 - p

    def is_binary_symmetric(self) -> bool:
        return True


@dataclass(frozen=True)
class TabulatedChannel(MdChannel):
    """Channel given by 2 x |Y| matrices at anchor states.

    The state is ``f(size)``; between anchors the matrix is interpolated
    linearly.  States outside the anchor range are invalid.
    """

    f: LipschitzFn
    states: tuple
    matrices: tuple = field(repr=False)
    family = "tabulated"

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        mats = np.asarray(self.matrices, dtype=float)
        if states.ndim != 1 or len(states) < 1:
            raise ChannelError("need at least one anchor state")
        if np.any(np.diff(states) <= 0):
            raise ChannelError("anchor states must be strictly increasing")
        if mats.ndim != 3 or mats.shape[0] != len(states) or mats.shape[1] != 2:
            raise ChannelError("matrices must have shape (n_states, 2, |Y|)")
        if mats.shape[2] < 2:
            raise ChannelError("output alphabet needs at least two symbols")
        if np.any(mats < 0) or np.any(np.abs(mats.sum(axis=2) - 1.0) > ROW_TOL):
            raise ChannelError("every row must be a probability vector")
        lo, hi = self.f.min_value(), self.f.max_value()
        if lo < states[0] - 1e-12 or hi > states[-1] + 1e-12:
            raise ChannelError(
                f"state map range [{lo}, {hi}] not covered by anchors "
                f"[{states[0]}, {states[-1]}]"
            )
        object.__setattr__(self, "_states", states)
        object.__setattr__(self, "_mats", mats)

    @classmethod
    def from_rows(cls, f: LipschitzFn, states: Sequence[float], matrices) -> "TabulatedChannel":
        return cls(
            f,
            tuple(float(s) for s in states),
            tuple(tuple(tuple(float(v) for v in row) for row in m) for m in matrices),
        )

    @property
    def n_outputs(self) -> int:
        return self._mats.shape[2]

    def matrix(self, size: float) -> np.ndarray:
        s = self.f(size)
        states, mats = self._states, self._mats
        if len(states) == 1:
            return mats[0].copy()
        s = min(max(s, states[0]), states[-1])
        j = int(np.searchsorted(states, s, side="right")) - 1
        j = min(max(j, 0), len(states) - 2)
        w = (s - states[j]) / (states[j + 1] - states[j])
        m = (1.0 - w) * mats[j] + w * mats[j + 1]
        return m / m.sum(axis=1, keepdims=True)


def transition_prob(ch: MdChannel, size: float, x: int, y: int) -> float:
    return ch.transition_prob(size, x, y)


def sample_response(ch: MdChannel, size: float, x: int, rng: np.random.Generator) -> int:
    return ch.sample(size, x, rng)


@dataclass(frozen=True)
class ContinuityReport:
    q: float
    xi: float
    lhs: float
    bound_c: float
    satisfied: bool


def _sup_log_ratio(p: np.ndarray, r: np.ndarray) -> float:
    # 0/0 entries carry no information and are skipped; 0 against >0 is infinite
    both_zero = (p == 0) & (r == 0)
    if np.any((p == 0) != (r == 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(both_zero, 0.0, np.abs(np.log(p / r)))
    return float(ratios.max())


def check_continuity(ch: MdChannel, q: float, xi: float, c: float) -> ContinuityReport:
    """Check the log-ratio continuity bound of the channel family at size ``q``."""
    if not 0.0 < xi < min(q, 1.0 - q):
        raise ChannelError(f"need 0 < xi < min(q, 1-q); got q={q}, xi={xi}")
    base = ch.matrix(q)
    lhs = max(
        _sup_log_ratio(base, ch.matrix(q + xi)),
        _sup_log_ratio(base, ch.matrix(q - xi)),
    )
    return ContinuityReport(q, xi, lhs, c, bool(lhs <= c * xi))
