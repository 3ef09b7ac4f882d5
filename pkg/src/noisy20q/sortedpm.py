"""Sorted posterior matching baseline for one-dimensional targets.

The posterior is piecewise constant on intervals of [0, 1].  Interval
edges live on the integer lattice ``k / 2**LATTICE_BITS`` so that
resolutions far below float spacing stay exact.

Each step sorts the intervals by posterior density (descending, stable
on position), queries the sorted prefix whose mass is closest to 1/2 and
Bayes-updates every interval with the channel law at the realized query
size.  With ``refine=True`` the interval that straddles mass 1/2 is split
so the query carries mass 1/2 up to lattice rounding; this removes the
resolution floor of a fixed grid.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channel import MdChannel
from .engine import TrialRecord, finish_record, termination_draw

LATTICE_BITS = 1000
ONE = 1 << LATTICE_BITS
STOP_RULES = ("fixed_n", "mass_threshold")


@dataclass
class PosteriorState:
    edges: list            # lattice positions, ascending, len = n_intervals + 1
    weights: np.ndarray    # posterior mass per interval
    lengths: np.ndarray    # float interval lengths
    step: int = 0

    @classmethod
    def uniform(cls, M_pm: int) -> "PosteriorState":
        if M_pm < 1:
            raise ValueError("M_pm must be >= 1")
        edges = [(i * ONE) // M_pm for i in range(M_pm + 1)]
        return cls(edges, np.full(M_pm, 1.0 / M_pm), _lengths(edges))

    @property
    def M_pm(self) -> int:
        return len(self.weights)

    def interval(self, j: int) -> tuple[Fraction, Fraction]:
        return Fraction(self.edges[j], ONE), Fraction(self.edges[j + 1], ONE)

    def locate(self, s) -> int:
        """Index of the interval holding point s (last interval closed)."""
        pos = math.floor(Fraction(s) * ONE)
        return min(bisect.bisect_right(self.edges, pos) - 1, self.M_pm - 1)

    def densities(self) -> np.ndarray:
        return self.weights / self.lengths

    def argmax(self) -> int:
        return int(np.argmax(self.densities()))

    def copy(self) -> "PosteriorState":
        return PosteriorState(list(self.edges), self.weights.copy(), self.lengths.copy(), self.step)


def _lengths(edges: Sequence[int]) -> np.ndarray:
    return np.array(
        [math.ldexp(float(b - a), -LATTICE_BITS) for a, b in zip(edges[:-1], edges[1:])]
    )


@dataclass
class PMStep:
    selected: np.ndarray   # interval indices forming the query (after any split)
    query_size: float
    x: int
    y: int


def select_prefix(weights: np.ndarray, order: np.ndarray) -> int:
    """Length of the sorted prefix with mass closest to 1/2 (shorter on ties)."""
    cum = np.cumsum(weights[order])
    return int(np.argmin(np.abs(cum - 0.5))) + 1


def _split(st: PosteriorState, j: int, frac: float) -> bool:
    lo, hi = st.edges[j], st.edges[j + 1]
    cut = lo + int((hi - lo) * frac)
    if cut <= lo or cut >= hi:
        return False
    phi = (cut - lo) / (hi - lo)
    w = st.weights[j]
    st.edges.insert(j + 1, cut)
    st.weights = np.insert(st.weights, j + 1, w * (1 - phi))
    st.weights[j] = w * phi
    st.lengths = np.insert(st.lengths, j + 1, math.ldexp(float(hi - cut), -LATTICE_BITS))
    st.lengths[j] = math.ldexp(float(cut - lo), -LATTICE_BITS)
    return True


def pm_step(
    st: PosteriorState,
    ch: MdChannel,
    truth,
    rng: np.random.Generator,
    refine: bool = False,
) -> PMStep:
    """Advance ``st`` in place by one query and return what was asked."""
    if ch.n_outputs != 2:
        raise ValueError("sorted posterior matching needs a binary-output channel")
    if not refine and st.weights.max() >= 1.0:
        # point mass on a fixed grid: nothing left to learn
        j = int(np.argmax(st.weights))
        st.step += 1
        return PMStep(np.array([j]), float(st.lengths[j]), -1, -1)

    order = np.argsort(-st.densities(), kind="stable")
    if refine:
        cum = np.cumsum(st.weights[order])
        k = int(np.searchsorted(cum, 0.5))
        k = min(k, len(order) - 1)
        j = int(order[k])
        before = cum[k - 1] if k else 0.0
        if st.weights[j] > 0 and _split(st, j, (0.5 - before) / st.weights[j]):
            sel = np.concatenate([order[:k], [j]])
            sel = np.where(sel > j, sel + 1, sel)
        else:
            sel = order[: select_prefix(st.weights, order)]
    else:
        sel = order[: select_prefix(st.weights, order)]

    in_query = np.zeros(st.M_pm, dtype=bool)
    in_query[sel] = True
    size = min(float(st.lengths[in_query].sum()), 1.0)
    x = int(in_query[st.locate(truth)])
    y = ch.sample(size, x, rng)
    like1, like0 = ch.transition_prob(size, 1, y), ch.transition_prob(size, 0, y)
    w = st.weights * np.where(in_query, like1, like0)
    st.weights = w / w.sum()
    st.step += 1
    return PMStep(np.sort(sel), size, x, y)


def pm_run(
    ch: MdChannel,
    n_queries: int,
    truth,
    rng: np.random.Generator,
    M_pm: int = 1,
    refine: bool = True,
    stop_rule: str = "fixed_n",
    theta: float = 0.99,
    epsilon_term: float = 0.0,
    delta_eval=None,
) -> TrialRecord:
    """Run sorted PM for ``n_queries`` steps (or until the top mass reaches ``theta``)."""
    if len(truth) != 1:
        raise ValueError("sorted posterior matching is one-dimensional")
    if stop_rule not in STOP_RULES:
        raise ValueError(f"stop_rule must be one of {STOP_RULES}")
    s = (Fraction(truth[0]),)
    delta = Fraction(1, M_pm) if delta_eval is None else Fraction(delta_eval)
    name = "sorted_pm_terminated" if epsilon_term > 0 else "sorted_pm"
    if termination_draw(epsilon_term, rng):
        return finish_record(
            name, s, (Fraction(1, 2),), delta, tau=0, terminated=True, capped=False,
        )

    st = PosteriorState.uniform(M_pm)
    sizes = []
    for _ in range(n_queries):
        if stop_rule == "mass_threshold" and st.weights.max() >= theta:
            break
        sizes.append(pm_step(st, ch, s[0], rng, refine=refine).query_size)
    j = st.argmax()
    lo, hi = st.interval(j)
    kw = {}
    if sizes:
        kw = dict(query_size_mean=float(np.mean(sizes)), query_size_min=min(sizes),
                  query_size_max=max(sizes))
    return finish_record(
        name, s, ((lo + hi) / 2,), delta,
        tau=st.step, terminated=False, capped=False,
        decoded_flat=j + 1, true_flat=st.locate(s[0]) + 1, **kw,
    )
