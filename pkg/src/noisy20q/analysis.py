"""Capacities and asymptotic resolution-decay rates (nats per query)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import LipschitzFn, MdBSC, MdChannel
from .infodensity import DensityParams

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GRID_STEP = 1e-3
PROCEDURES = ("alg2", "sorted_pm", "sorted_pm_terminated", "measurement_independent")


def binary_entropy(p):
    """h_b(p) in nats with 0 log 0 = 0; accepts scalars or arrays."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("binary entropy argument outside [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -arr * np.log(arr) - (1 - arr) * np.log1p(-arr)
    h = np.where((arr == 0) | (arr == 1), 0.0, h)
    return float(h) if np.ndim(p) == 0 else h


def _crossover(nu, f: LipschitzFn, q):
    q = np.asarray(q, dtype=float)
    c = nu * (f.a + f.b * q)
    if np.any(c < 0) or np.any(c > 0.5 + 1e-15):
        raise ValueError("nu * f(q) must lie in [0, 1/2]")
    return c


def beta(nu: float, q, f: LipschitzFn):
    """Probability that the mdBSC outputs 1 when the input is Bern(q) at size q."""
    c = _crossover(nu, f, q)
    return q * (1 - c) + (1 - q) * c


def bsc_objective(nu: float, f: LipschitzFn, q):
    return binary_entropy(beta(nu, q, f)) - binary_entropy(_crossover(nu, f, q))


@dataclass(frozen=True)
class CapacityResult:
    value: float
    argmax_q: float
    method: str
    tolerance: float


def golden_section_max(fn: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (a + b) / 2


def maximize_on_unit(fn: Callable[[float], float], tol: float, grid=None) -> tuple[float, float]:
    """Coarse grid to bracket, then golden section inside the best bracket."""
    qs = np.linspace(0.0, 1.0, round(1 / GRID_STEP) + 1)
    vals = np.array([fn(q) for q in qs]) if grid is None else grid(qs)
    k = int(np.argmax(vals))
    lo, hi = qs[max(k - 1, 0)], qs[min(k + 1, len(qs) - 1)]
    q_star = golden_section_max(fn, lo, hi, tol)
    candidates = [(fn(q_star), q_star), (float(vals[k]), float(qs[k]))]
    best = max(candidates)
    return best[0], best[1]


def capacity_bsc(nu: float, f: LipschitzFn, tol: float = 1e-10) -> CapacityResult:
    """Maximize h_b(beta) - h_b(nu f(q)) over q in [0, 1]."""
    if nu * f.max_value() > 0.5 + 1e-15:
        raise ValueError("nu * f(q) exceeds 1/2 somewhere on [0, 1]")
    value, q = maximize_on_unit(
        lambda q: float(bsc_objective(nu, f, q)), tol, grid=lambda qs: bsc_objective(nu, f, qs)
    )
    for probe in (0.25, 0.5, 0.75):
        assert value >= float(bsc_objective(nu, f, probe)) - 1e-12
    return CapacityResult(value, float(q), "golden_section", tol)


def mutual_information(ch: MdChannel, q: float) -> float:
    """E[density] for (X, Y) ~ Bern(q) x P^{size=q}, by enumerating (x, y)."""
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return DensityParams(q, q, ch).mutual_information()


def capacity_general(ch: MdChannel, tol: float = 1e-10) -> CapacityResult:
    value, q = maximize_on_unit(lambda q: mutual_information(ch, q), tol)
    return CapacityResult(max(value, 0.0), float(q), "golden_section", tol)


def capacity_dense_grid(nu: float, f: LipschitzFn, step: float = 1e-6) -> CapacityResult:
    """Brute-force reference: evaluate the BSC objective on a uniform grid."""
    qs = np.linspace(0.0, 1.0, round(1 / step) + 1)
    vals = bsc_objective(nu, f, qs)
    k = int(np.argmax(vals))
    return CapacityResult(float(vals[k]), float(qs[k]), "grid", step)


def sorted_pm_rate(nu: float, f: LipschitzFn) -> float:
    c = nu * f(0.0)
    if not 0.0 <= c <= 0.5:
        raise ValueError("nu * f(0) must lie in [0, 1/2]")
    return math.log(2.0) - binary_entropy(c)


@dataclass
class RateCurve:
    procedure: str
    nu: float
    f: LipschitzFn
    d: int
    capacity: float
    argmax_q: float | None
    points: list = field(default_factory=list)   # (epsilon, rate) pairs

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([e for e, _ in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for _, r in self.points])


def rate_curves(
    nu: float,
    f: LipschitzFn,
    eps_grid: Sequence[float],
    d: int = 1,
    mi_alpha: float | None = None,
    procedures: Sequence[str] | None = None,
    tol: float = 1e-10,
) -> list[RateCurve]:
    """Per-query, per-dimension asymptotic rates as functions of epsilon.

    The O(log l) correction is ignored; only first-order slopes are reported.
    """
    eps = [float(e) for e in eps_grid]
    if any(not 0.0 <= e < 1.0 for e in eps):
        raise ValueError("epsilon values must lie in [0, 1)")
    if procedures is None:
        procedures = ["alg2"]
        if d == 1:
            procedures += ["sorted_pm", "sorted_pm_terminated"]
        if mi_alpha is not None or f.kind == "constant":
            procedures.append("measurement_independent")
    if d != 1 and any(p.startswith("sorted_pm") for p in procedures):
        raise ValueError("sorted PM curves are defined for d = 1 only")

    curves = []
    for proc in procedures:
        if proc == "alg2":
            cap = capacity_bsc(nu, f, tol)
            pts = [(e, cap.value / (d * (1 - e))) for e in eps]
            curves.append(RateCurve(proc, nu, f, d, cap.value, cap.argmax_q, pts))
        elif proc == "sorted_pm":
            c = sorted_pm_rate(nu, f)
            curves.append(RateCurve(proc, nu, f, d, c, None, [(e, c) for e in eps]))
        elif proc == "sorted_pm_terminated":
            c = sorted_pm_rate(nu, f)
            curves.append(RateCurve(proc, nu, f, d, c, None, [(e, c / (1 - e)) for e in eps]))
        elif proc == "measurement_independent":
            alpha = f.a if mi_alpha is None else mi_alpha
            cap = capacity_general(MdBSC(nu, LipschitzFn.constant(alpha)), tol)
            pts = [(e, cap.value / (d * (1 - e))) for e in eps]
            curves.append(RateCurve(proc, nu, LipschitzFn.constant(alpha), d,
                                    cap.value, cap.argmax_q, pts))
        else:
            raise ValueError(f"unknown procedure {proc!r}; expected one of {PROCEDURES}")
    return curves


def crossover_epsilon(nu: float, f: LipschitzFn, d: int = 1, tol: float = 1e-12) -> float | None:
    """Smallest epsilon where C_f / (d (1 - eps)) reaches the sorted PM rate.

    Found by bisection on the difference of the two closed forms; ``None``
    when the terminated procedure already wins at eps = 0.
    """
    c_alg = capacity_bsc(nu, f).value / d
    c_pm = sorted_pm_rate(nu, f)
    gap = lambda e: c_alg / (1 - e) - c_pm
    if gap(0.0) >= 0:
        return None
    lo, hi = 0.0, 1.0 - 1e-15
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if gap(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi
