"""Adaptive query procedure with information-density stopping, plus termination.

Each step draws one Bern(q) bit per bin, asks whether the target lies in
the union of the bins whose bit is 1, and feeds the noisy answer to every
bin's running density.  The procedure stops as soon as some bin's density
reaches ``lam``.

Two laws are kept apart on purpose:

* the response is generated by the channel at the *realized* query size
  ``|A_t|`` (number of selected bins over M^d);
* the densities are always computed with the *nominal* law at size q.

Two interchangeable backends run the same procedure:

``explicit``
    literal simulation with one counter row per bin; needs M^d in memory.
``population``
    the M^d - 1 bins not containing the target are exchangeable, so they
    are tracked as a histogram over counter states and split by binomial
    draws each step.  Same law as ``explicit`` (up to the pruning and the
    normal approximation noted below), but cost independent of M^d, which
    is what makes resolutions like e^-100 reachable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channel import MdChannel
from .indexing import (
    Partition,
    bin_center_exact,
    bin_of,
    gamma,
    gamma_inv,
    linf_distance,
)
from .infodensity import DensityAccumulator, DensityParams, weighted_sum

EXPLICIT_MAX_BINS = 1 << 20
# binomial draws above this size use the normal approximation
EXACT_BINOMIAL_MAX = float(1 << 50)
DECODERS = ("max_index", "argmax")
# relative slack on the threshold test; absorbs summation-order rounding only
THRESHOLD_RTOL = 1e-12
BACKENDS = ("auto", "explicit", "population")


def default_max_steps(lam: float) -> int:
    return 50 * max(1, math.ceil(lam / 0.01))


def choose_lambda(M: int, d: int, target_eps: float) -> float:
    """Threshold log((M^d - 1) / target_eps)."""
    if not 0.0 < target_eps < 1.0:
        raise ValueError(f"target_eps={target_eps} outside (0, 1)")
    n = M**d
    if n < 2:
        raise ValueError("need at least two bins")
    return math.log(n - 1) - math.log(target_eps)


@dataclass(frozen=True)
class ProcedureConfig:
    M: int
    d: int = 1
    q: float = 0.5
    lam: float = 1.0
    epsilon_term: float = 0.0
    max_steps: int | None = None
    decoder: str = "max_index"
    backend: str = "auto"
    # population backend: drop a counter state once count * exp(density - lam)
    # falls below this (a bound on the chance any of its bins ever crosses)
    prune: float = 1e-12

    def __post_init__(self):
        Partition(self.M, self.d)
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q={self.q} outside (0, 1)")
        if not self.lam > 0:
            raise ValueError(f"lambda={self.lam} must be positive")
        if not 0.0 <= self.epsilon_term < 1.0:
            raise ValueError(f"epsilon_term={self.epsilon_term} outside [0, 1)")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.backend == "explicit" and self.n_bins > EXPLICIT_MAX_BINS:
            raise ValueError(f"explicit backend limited to {EXPLICIT_MAX_BINS} bins")

    @property
    def partition(self) -> Partition:
        return Partition(self.M, self.d)

    @property
    def n_bins(self) -> int:
        return self.M**self.d

    @property
    def threshold(self) -> float:
        return self.lam - THRESHOLD_RTOL * max(1.0, abs(self.lam))

    @property
    def cap(self) -> int:
        return self.max_steps if self.max_steps is not None else default_max_steps(self.lam)

    def resolved_backend(self) -> str:
        if self.backend != "auto":
            return self.backend
        return "explicit" if self.n_bins <= 4096 else "population"

    def check_channel(self, ch: MdChannel) -> None:
        # constructing the nominal density table validates the channel at q
        DensityParams(self.q, self.q, ch)


@dataclass
class TrialRecord:
    procedure: str
    tau: int
    terminated: bool
    capped: bool
    estimate: tuple
    truth: tuple
    resolution: float
    log_resolution: float
    excess: bool
    decoded_flat: int | None = None
    true_flat: int | None = None
    query_size_mean: float = math.nan
    query_size_min: float = math.nan
    query_size_max: float = math.nan
    pruned_bound: float = 0.0

    @property
    def failure(self) -> bool:
        """Excess resolution, counting capped runs as failures."""
        return self.excess or self.capped


def log_fraction(x: Fraction) -> float:
    if x <= 0:
        return -math.inf
    return math.log(x.numerator) - math.log(x.denominator)


def finish_record(
    procedure: str,
    truth: Sequence[Fraction],
    estimate: Sequence[Fraction],
    delta_eval: Fraction,
    **kw,
) -> TrialRecord:
    err = linf_distance(estimate, truth)
    return TrialRecord(
        procedure=procedure,
        estimate=tuple(float(e) for e in estimate),
        truth=tuple(float(s) for s in truth),
        resolution=float(err),
        log_resolution=log_fraction(err),
        excess=err > delta_eval,
        **kw,
    )


def termination_draw(epsilon: float, rng: np.random.Generator) -> bool:
    """Draw the termination coin on a child stream so ``rng`` itself is untouched."""
    if epsilon <= 0:
        return False
    return bool(rng.spawn(1)[0].random() < epsilon)


class _SizeStats:
    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.lo = math.inf
        self.hi = -math.inf

    def add(self, s: float) -> None:
        self.n += 1
        self.total += s
        self.lo = min(self.lo, s)
        self.hi = max(self.hi, s)

    def as_kw(self) -> dict:
        if self.n == 0:
            return {}
        return dict(
            query_size_mean=self.total / self.n,
            query_size_min=self.lo,
            query_size_max=self.hi,
        )


def run_trial(
    cfg: ProcedureConfig,
    ch: MdChannel,
    truth: Sequence,
    rng: np.random.Generator,
    delta_eval=None,
) -> TrialRecord:
    """One run of the procedure (with termination when ``cfg.epsilon_term > 0``)."""
    part = cfg.partition
    truth = tuple(Fraction(s) for s in truth)
    true_flat = gamma(part, bin_of(part, truth))
    delta = Fraction(1, cfg.M) if delta_eval is None else Fraction(delta_eval)
    name = "alg2" if cfg.epsilon_term > 0 else "alg1"

    if termination_draw(cfg.epsilon_term, rng):
        center = (Fraction(1, 2),) * cfg.d
        return finish_record(
            name, truth, center, delta,
            tau=0, terminated=True, capped=False, true_flat=true_flat,
        )

    if cfg.resolved_backend() == "explicit":
        out = _run_explicit(cfg, ch, true_flat, rng)
    else:
        out = _run_population(cfg, ch, true_flat, rng)
    tau, capped, decoded, stats, pruned = out
    estimate = bin_center_exact(part, gamma_inv(part, decoded))
    return finish_record(
        name, truth, estimate, delta,
        tau=tau, terminated=False, capped=capped,
        decoded_flat=decoded, true_flat=true_flat, pruned_bound=pruned,
        **stats.as_kw(),
    )


def _run_explicit(cfg, ch, true_flat, rng):
    n = cfg.n_bins
    acc = DensityAccumulator(DensityParams(cfg.q, cfg.q, ch), n, cfg.lam)
    stats = _SizeStats()
    for t in range(1, cfg.cap + 1):
        bits = rng.random(n) < cfg.q
        size = int(bits.sum()) / n
        stats.add(size)
        y = ch.sample(size, int(bits[true_flat - 1]), rng)
        acc.accumulate(bits, y)
        dens = acc.densities()
        best = dens.max()
        if best >= cfg.threshold:
            if cfg.decoder == "max_index":
                decoded = int(np.flatnonzero(dens >= cfg.threshold)[-1]) + 1
            else:
                decoded = int(np.flatnonzero(dens == best)[-1]) + 1
            return t, False, decoded, stats, 0.0
    decoded, _ = acc.max_bin()
    return cfg.cap, True, decoded, stats, 0.0


def binomial_counts(counts: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Binomial(count, p) per entry; float counts, normal approximation when huge."""
    counts = np.asarray(counts, dtype=float)
    out = np.empty_like(counts)
    small = counts <= EXACT_BINOMIAL_MAX
    if small.any():
        out[small] = rng.binomial(counts[small].astype(np.int64), p)
    big = ~small
    if big.any():
        c = counts[big]
        draw = np.rint(c * p + np.sqrt(c * p * (1 - p)) * rng.standard_normal(len(c)))
        out[big] = np.clip(draw, 0, c)
    return out


def randbelow(n: int, rng: np.random.Generator) -> int:
    """Uniform integer in [0, n) for arbitrarily large n."""
    if n <= (1 << 62):
        return int(rng.integers(n))
    nbytes = (n.bit_length() + 7) // 8 + 8
    # 64 spare bits make the modulo bias negligible
    return int.from_bytes(rng.bytes(nbytes), "little") % n


def max_of_distinct_others(n: int, exclude: int, k: int, rng) -> int:
    """Largest of k distinct indices drawn uniformly from [1, n] minus ``exclude``."""
    others = n - 1
    if k > others:
        raise ValueError("more qualifying bins than bins")
    if k <= 10_000 and k * 4 <= others:
        seen: set[int] = set()
        while len(seen) < k:
            seen.add(randbelow(others, rng))
        r = max(seen)
    elif others <= 10**7:
        r = int(rng.choice(others, size=k, replace=False).max())
    else:
        # k distinct out of a huge range: with-replacement order statistic
        r = min(int(others * rng.random() ** (1.0 / k)), others - 1)
    r += 1
    return r if r < exclude else r + 1


def _run_population(cfg, ch, true_flat, rng):
    n = cfg.n_bins
    q, lam, thr = cfg.q, cfg.lam, cfg.threshold
    params = DensityParams(q, q, ch)
    i0, i1 = params._table[0], params._table[1]
    ny = ch.n_outputs
    n_y = np.zeros(ny, dtype=np.int64)
    truth_ones = np.zeros(ny, dtype=np.int64)
    keys = np.zeros((1, ny), dtype=np.int64)
    cnt = np.array([float(n - 1)])
    if n == 1:
        keys, cnt = keys[:0], cnt[:0]
    dead = 0.0
    pruned = 0.0
    log_prune = math.log(cfg.prune)
    stats = _SizeStats()
    dens = np.empty(0)

    for t in range(1, cfg.cap + 1):
        x = int(rng.random() < q)
        ones = binomial_counts(cnt, q, rng)
        dead_ones = float(binomial_counts(np.array([dead]), q, rng)[0]) if dead else 0.0
        size = min(max((x + ones.sum() + dead_ones) / n, 0.0), 1.0)
        stats.add(size)
        y = ch.sample(size, x, rng)

        moved = keys.copy()
        moved[:, y] += 1
        keys = np.concatenate([moved, keys])
        cnt = np.concatenate([ones, cnt - ones])
        live = cnt > 0
        keys, cnt = keys[live], cnt[live]
        keys, cnt = _merge(keys, cnt, n_y + 1 + (np.arange(ny) == y))

        n_y[y] += 1
        truth_ones[y] += x
        dens = weighted_sum(keys, i1) + weighted_sum(n_y - keys, i0)
        slack = np.log(cnt) + dens - lam
        drop = slack < log_prune
        if drop.any():
            pruned += float(np.exp(slack[drop]).sum())
            dead += float(cnt[drop].sum())
            keys, cnt, dens = keys[~drop], cnt[~drop], dens[~drop]

        d_true = float(weighted_sum(truth_ones, i1) + weighted_sum(n_y - truth_ones, i0))
        best = max(d_true, float(dens.max()) if len(dens) else -math.inf)
        if best >= thr:
            if cfg.decoder == "max_index":
                decoded = _decode_population(true_flat, d_true >= thr, cnt[dens >= thr], n, rng)
            else:
                decoded = _decode_population(true_flat, d_true == best, cnt[dens == best], n, rng)
            return t, False, decoded, stats, pruned

    best = max(d_true, float(dens.max()) if len(dens) else -math.inf)
    decoded = _decode_population(true_flat, d_true == best, cnt[dens == best], n, rng)
    return cfg.cap, True, decoded, stats, pruned


def _merge(keys: np.ndarray, cnt: np.ndarray, dims) -> tuple[np.ndarray, np.ndarray]:
    if len(cnt) <= 1:
        return keys, cnt
    dims = tuple(int(v) for v in dims)
    if math.prod(dims) < (1 << 62):
        flat = np.ravel_multi_index(tuple(keys.T), dims)
        uniq, inv = np.unique(flat, return_inverse=True)
        merged = np.bincount(inv, weights=cnt)
        return np.stack(np.unravel_index(uniq, dims), axis=1).astype(np.int64), merged
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    return uniq, np.bincount(inv.ravel(), weights=cnt)


def _decode_population(true_flat, truth_in, wrong_counts, n, rng) -> int:
    k = int(round(float(np.sum(wrong_counts))))
    if k == 0:
        return true_flat
    top = max_of_distinct_others(n, true_flat, k, rng)
    return max(top, true_flat) if truth_in else top


@dataclass(frozen=True)
class PairSample:
    tau1: int
    tau2: int | None
    capped: bool

    @property
    def collision(self) -> bool:
        """The event tau_1 >= tau_2."""
        return self.tau2 is not None and self.tau2 <= self.tau1


def stopping_time_pair(
    cfg: ProcedureConfig,
    ch: MdChannel,
    rng: np.random.Generator,
    run_past_tau1: bool = False,
) -> PairSample:
    """First-passage times of bins 1 and 2 when the target sits in bin 1.

    Responses come from the channel at the realized query size, exactly as
    in :func:`run_trial`.  By default the run stops at tau_1; ``tau2`` is
    then ``None`` when bin 2 has not crossed by that time, which is all the
    event tau_1 >= tau_2 needs.
    """
    n = cfg.n_bins
    q, lam = cfg.q, cfg.threshold
    params = DensityParams(q, q, ch)
    i0, i1 = params._table[0], params._table[1]
    ny = ch.n_outputs
    n_y = np.zeros(ny, dtype=np.int64)
    ones = np.zeros((2, ny), dtype=np.int64)
    rest = max(n - 2, 0)
    tau1 = tau2 = None
    for t in range(1, cfg.cap + 1):
        b = (rng.random(2) < q).astype(np.int64)
        if n == 1:
            b[1] = 0
        extra = float(binomial_counts(np.array([float(rest)]), q, rng)[0]) if rest else 0.0
        size = min((b[0] + (b[1] if n > 1 else 0) + extra) / n, 1.0)
        y = ch.sample(size, int(b[0]), rng)
        n_y[y] += 1
        ones[:, y] += b
        dens = weighted_sum(ones, i1) + weighted_sum(n_y[None, :] - ones, i0)
        if tau2 is None and n > 1 and dens[1] >= lam:
            tau2 = t
        if tau1 is None and dens[0] >= lam:
            tau1 = t
        if tau1 is not None and (tau2 is not None or not run_past_tau1):
            return PairSample(tau1, tau2, False)
    return PairSample(tau1 if tau1 is not None else cfg.cap, tau2, tau1 is None)


def with_termination(cfg: ProcedureConfig, epsilon: float) -> ProcedureConfig:
    return replace(cfg, epsilon_term=epsilon)
