"""Monte Carlo harness: seeded independent trials, summaries, CSV output.

Trial i draws everything from ``SeedSequence(master_seed + i)``: one child
stream for the target, one for the procedure.  Results therefore do not
depend on how trials are distributed over workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import MdChannel
from .engine import ProcedureConfig, TrialRecord, run_trial, stopping_time_pair
from .sortedpm import pm_run

PROCEDURES = ("alg1", "alg2", "sorted_pm", "sorted_pm_terminated")
TRUTH_BITS = 1024
DEFAULT_LEVELS = (0.5, 0.9, 0.99)


@dataclass(frozen=True)
class PMConfig:
    n_queries: int = 100
    M_pm: int = 1
    refine: bool = True
    stop_rule: str = "fixed_n"
    theta: float = 0.99
    epsilon_term: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    procedure: str
    channel: MdChannel
    proc: ProcedureConfig | None = None
    pm: PMConfig | None = None
    n_trials: int = 1000
    master_seed: int = 0
    truth: tuple | None = None          # None: uniform on the cube
    delta_eval: float | None = None     # None: one bin width
    output_path: str | None = None
    workers: int = 1
    levels: tuple = DEFAULT_LEVELS

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise ValueError(f"procedure must be one of {PROCEDURES}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.delta_eval is not None and not 0 < self.delta_eval < 1:
            raise ValueError("delta_eval must lie in (0, 1)")
        if self.procedure.startswith("alg"):
            if self.proc is None:
                raise ValueError(f"{self.procedure} needs procedure parameters")
            if self.procedure == "alg1" and self.proc.epsilon_term != 0:
                raise ValueError("alg1 has no termination; use alg2")
            if self.procedure == "alg2" and self.proc.epsilon_term <= 0:
                raise ValueError("alg2 needs epsilon_term > 0")
            self.proc.check_channel(self.channel)
        else:
            if self.pm is None:
                raise ValueError(f"{self.procedure} needs sorted PM parameters")
            if self.procedure == "sorted_pm" and self.pm.epsilon_term != 0:
                raise ValueError("sorted_pm has no termination; use sorted_pm_terminated")
            if self.procedure == "sorted_pm_terminated" and self.pm.epsilon_term <= 0:
                raise ValueError("sorted_pm_terminated needs epsilon_term > 0")
            if self.channel.n_outputs != 2:
                raise ValueError("sorted PM needs a binary-output channel")
        if self.truth is not None:
            if len(self.truth) != self.dim or any(not 0 <= s <= 1 for s in self.truth):
                raise ValueError(f"fixed truth must be a point in [0,1]^{self.dim}")

    @property
    def dim(self) -> int:
        return self.proc.d if self.procedure.startswith("alg") else 1


@dataclass
class ExperimentSummary:
    procedure: str
    n_trials: int
    mean_tau: float
    tau_stderr: float
    excess_prob: float
    excess_stderr: float
    capped_fraction: float
    terminated_fraction: float
    resolution_quantiles: dict = field(default_factory=dict)
    log_resolution_quantiles: dict = field(default_factory=dict)
    mean_query_size: float = math.nan
    max_pruned_bound: float = 0.0

    @property
    def tau_errbar(self) -> float:
        return 3 * self.tau_stderr

    @property
    def excess_errbar(self) -> float:
        return 3 * self.excess_stderr


def trial_streams(master_seed: int, i: int) -> tuple[np.random.Generator, np.random.Generator]:
    truth_ss, proc_ss = np.random.SeedSequence(master_seed + i).spawn(2)
    return np.random.default_rng(truth_ss), np.random.default_rng(proc_ss)


def uniform_point(d: int, rng: np.random.Generator) -> tuple[Fraction, ...]:
    """Uniform point of [0,1)^d with TRUTH_BITS binary digits per coordinate."""
    nbytes = TRUTH_BITS // 8
    return tuple(
        Fraction(int.from_bytes(rng.bytes(nbytes), "little"), 1 << TRUTH_BITS)
        for _ in range(d)
    )


def run_one(cfg: ExperimentConfig, i: int) -> TrialRecord:
    truth_rng, rng = trial_streams(cfg.master_seed, i)
    truth = uniform_point(cfg.dim, truth_rng) if cfg.truth is None else cfg.truth
    if cfg.procedure.startswith("alg"):
        return run_trial(cfg.proc, cfg.channel, truth, rng, cfg.delta_eval)
    pm = cfg.pm
    return pm_run(
        cfg.channel, pm.n_queries, truth, rng,
        M_pm=pm.M_pm, refine=pm.refine, stop_rule=pm.stop_rule, theta=pm.theta,
        epsilon_term=pm.epsilon_term, delta_eval=cfg.delta_eval,
    )


def _run_chunk(args) -> list[TrialRecord]:
    cfg, lo, hi = args
    return [run_one(cfg, i) for i in range(lo, hi)]


def run_trials(cfg: ExperimentConfig) -> list[TrialRecord]:
    if cfg.workers <= 1:
        return [run_one(cfg, i) for i in range(cfg.n_trials)]
    bounds = np.linspace(0, cfg.n_trials, cfg.workers * 4 + 1).astype(int)
    chunks = [(cfg, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(cfg.workers) as pool:
        return [r for part in pool.map(_run_chunk, chunks) for r in part]


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def summarize(
    records: Sequence[TrialRecord], levels: Sequence[float] = DEFAULT_LEVELS
) -> ExperimentSummary:
    """Capped trials count as failures; quantiles are order statistics of the error."""
    taus, tau_se = mean_stderr([r.tau for r in records])
    exc, exc_se = mean_stderr([r.failure for r in records])
    logs = np.array([r.log_resolution for r in records])
    logq = {lv: float(np.quantile(logs, lv, method="inverted_cdf")) for lv in levels}
    sizes = [r.query_size_mean for r in records if not math.isnan(r.query_size_mean)]
    return ExperimentSummary(
        procedure=records[0].procedure,
        n_trials=len(records),
        mean_tau=taus,
        tau_stderr=tau_se,
        excess_prob=exc,
        excess_stderr=exc_se,
        capped_fraction=float(np.mean([r.capped for r in records])),
        terminated_fraction=float(np.mean([r.terminated for r in records])),
        resolution_quantiles={lv: math.exp(v) for lv, v in logq.items()},
        log_resolution_quantiles=logq,
        mean_query_size=float(np.mean(sizes)) if sizes else math.nan,
        max_pruned_bound=max(r.pruned_bound for r in records),
    )


def run_experiment(cfg: ExperimentConfig) -> tuple[ExperimentSummary, list[TrialRecord]]:
    records = run_trials(cfg)
    summary = summarize(records, cfg.levels)
    if cfg.output_path:
        out = Path(cfg.output_path)
        write_trials_csv(out, records)
        write_summary_csv(out.with_suffix(".summary.csv"), [summary])
    return summary, records


# -- CSV ---------------------------------------------------------------------

def fmt(v) -> str:
    """Shortest round-trip text for floats; ';'-joined tuples; empty for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return ";".join(fmt(x) for x in v)
    return str(v)


def write_rows(path, header: Sequence[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


TRIAL_COLUMNS = [f.name for f in fields(TrialRecord)]


def write_trials_csv(path, records: Sequence[TrialRecord], extra: dict | None = None) -> None:
    extra = extra or {}
    header = list(extra) + TRIAL_COLUMNS
    rows = ([*extra.values(), *(getattr(r, c) for c in TRIAL_COLUMNS)] for r in records)
    write_rows(path, header, rows)


def summary_row(s: ExperimentSummary) -> dict:
    row = {k: v for k, v in asdict(s).items() if not k.endswith("quantiles")}
    for lv, v in s.resolution_quantiles.items():
        row[f"resolution_q{lv}"] = v
    for lv, v in s.log_resolution_quantiles.items():
        row[f"neg_log_resolution_q{lv}"] = -v
    return row


def write_summary_csv(path, summaries: Sequence[ExperimentSummary], keys: Sequence[dict] | None = None) -> None:
    rows = [dict(**(keys[i] if keys else {}), **summary_row(s)) for i, s in enumerate(summaries)]
    header = list(rows[0])
    write_rows(path, header, ([r[h] for h in header] for r in rows))


# -- sweeps and slopes -------------------------------------------------------

def run_sweep(
    cfg: ExperimentConfig, points: Sequence[dict]
) -> list[tuple[dict, ExperimentSummary, list[TrialRecord]]]:
    """Run ``cfg`` once per override dict; ``proc`` / ``pm`` keys replace nested fields."""
    out = []
    for over in points:
        c = cfg
        if "proc" in over:
            c = replace(c, proc=replace(c.proc, **over["proc"]))
        if "pm" in over:
            c = replace(c, pm=replace(c.pm, **over["pm"]))
        top = {k: v for k, v in over.items() if k not in ("proc", "pm", "label")}
        if top:
            c = replace(c, **top)
        summary, records = run_experiment(replace(c, output_path=None))
        out.append((over, summary, records))
    return out


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def fit_slope(xs, ys) -> SlopeFit:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss = np.sum((ys - ys.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / ss) if ss > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2)


# -- first-passage bounds ----------------------------------------------------

@dataclass
class FirstPassageReport:
    n_pairs: int
    n_trials: int
    mean_tau1: float
    tau1_stderr: float
    collision_prob: float
    error_bound: float          # (M^d - 1) * Pr{tau_1 >= tau_2}
    error_bound_stderr: float
    mean_tau: float
    tau_stderr: float
    excess_prob: float
    excess_stderr: float
    pair_capped_fraction: float
    trial_capped_fraction: float
    applicable: bool
    tau_ok: bool | None
    eps_ok: bool | None
    cap_contaminated: bool
    diagnosis: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.applicable and self.tau_ok and self.eps_ok and not self.cap_contaminated)


def validate_theorem1(
    cfg: ExperimentConfig,
    n_pairs: int | None = None,
    cap_tolerance: float = 0.01,
    n_sigma: float = 3.0,
) -> FirstPassageReport:
    """Compare realized mean stopping time and excess probability with the
    first-passage bounds E[tau_1] and (M^d - 1) Pr{tau_1 >= tau_2}.

    Both sides are Monte Carlo estimates; the checks allow ``n_sigma``
    combined standard errors.  The bounds speak about the max-index decoder
    without termination at resolution 1/M; other settings are reported but
    marked not applicable.
    """
    if not cfg.procedure.startswith("alg"):
        raise ValueError("first-passage bounds concern the adaptive query procedure")
    proc = cfg.proc
    n_pairs = n_pairs or cfg.n_trials
    pairs = []
    for i in range(n_pairs):
        _, rng = trial_streams(cfg.master_seed + cfg.n_trials, i)
        pairs.append(stopping_time_pair(proc, cfg.channel, rng))
    tau1, tau1_se = mean_stderr([p.tau1 for p in pairs])
    coll, coll_se = mean_stderr([p.collision for p in pairs])
    scale = proc.n_bins - 1
    bound, bound_se = scale * coll, scale * coll_se

    summary, _ = run_experiment(replace(cfg, output_path=None))
    pair_capped = float(np.mean([p.capped for p in pairs]))
    contaminated = max(pair_capped, summary.capped_fraction) > cap_tolerance
    applicable = (
        proc.decoder == "max_index"
        and proc.epsilon_term == 0
        and (cfg.delta_eval is None or Fraction(cfg.delta_eval) >= Fraction(1, proc.M))
    )
    tau_ok = eps_ok = None
    if applicable:
        tau_ok = summary.mean_tau <= tau1 + n_sigma * math.hypot(summary.tau_stderr, tau1_se)
        eps_ok = summary.excess_prob <= bound + n_sigma * math.hypot(summary.excess_stderr, bound_se)
    notes = []
    if contaminated:
        notes.append(
            f"capped fraction {max(pair_capped, summary.capped_fraction):.3g} exceeds "
            f"{cap_tolerance}; raise max_steps"
        )
    if not applicable:
        notes.append("bounds not applicable to this decoder/termination/resolution setting")
    return FirstPassageReport(
        n_pairs=n_pairs, n_trials=cfg.n_trials,
        mean_tau1=tau1, tau1_stderr=tau1_se,
        collision_prob=coll, error_bound=bound, error_bound_stderr=bound_se,
        mean_tau=summary.mean_tau, tau_stderr=summary.tau_stderr,
        excess_prob=summary.excess_prob, excess_stderr=summary.excess_stderr,
        pair_capped_fraction=pair_capped, trial_capped_fraction=summary.capped_fraction,
        applicable=applicable, tau_ok=tau_ok, eps_ok=eps_ok,
        cap_contaminated=contaminated, diagnosis="; ".join(notes),
    )
