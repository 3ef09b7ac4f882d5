"""Command-line interface.

    noisy20q capacity         --config cfg.yaml [--bits] [--out caps.csv]
    noisy20q rate-curves      --config cfg.yaml [--bits] [--out curves.csv]
    noisy20q simulate         --config cfg.yaml [--procedure P] [--trials N] [--seed S] [--out trials.csv]
    noisy20q validate-t1      --config cfg.yaml [--trials N] [--seed S] [--out report.csv]
    noisy20q check-continuity --config cfg.yaml [--out report.csv]

Exit codes: 0 success, 2 configuration error, 3 cap contamination in validate-t1.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import asdict
from typing import Sequence

import numpy as np

from . import config as cfgmod
from .analysis import (
    capacity_bsc,
    capacity_general,
    crossover_epsilon,
    rate_curves,
    sorted_pm_rate,
)
from .channel import MdBSC, check_continuity
from .harness import (
    fmt,
    run_experiment,
    summary_row,
    validate_theorem1,
    write_rows,
    write_summary_csv,
    write_trials_csv,
)

EXIT_CONFIG = 2
EXIT_CAPPED = 3
LN2 = math.log(2.0)


def emit(out: str | None, header: Sequence[str], rows) -> None:
    rows = list(rows)
    if out:
        write_rows(out, header, rows)
        return
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    sys.stdout.write(buf.getvalue())


def unit(bits: bool) -> tuple[str, float]:
    return ("bits", 1 / LN2) if bits else ("nats", 1.0)


def cmd_capacity(doc, args) -> int:
    ch = cfgmod.build_channel(doc)
    tol = float((doc.get("analysis") or {}).get("tol", 1e-10))
    name, k = unit(args.bits)
    header = ["family", "nu", "f_a", "f_b", f"capacity_{name}", "argmax_q", "method", f"sorted_pm_rate_{name}"]
    if isinstance(ch, MdBSC):
        nus = (doc.get("analysis") or {}).get("nu_grid") or [ch.nu]
        rows = []
        for nu in nus:
            c = capacity_bsc(float(nu), ch.f, tol)
            rows.append(["mdbsc", float(nu), ch.f.a, ch.f.b, c.value * k, c.argmax_q, c.method,
                         sorted_pm_rate(float(nu), ch.f) * k])
    else:
        c = capacity_general(ch, tol)
        rows = [[ch.family, None, ch.f.a, ch.f.b, c.value * k, c.argmax_q, c.method, None]]
    emit(args.out, header, rows)
    return 0


def cmd_rate_curves(doc, args) -> int:
    ch = cfgmod.build_channel(doc)
    if not isinstance(ch, MdBSC):
        raise cfgmod.ConfigError("rate-curves needs an mdbsc channel")
    sec = doc.get("analysis") or {}
    eps_max = float(sec.get("eps_max", 0.95))
    if not 0 < eps_max < 1:
        raise cfgmod.ConfigError("analysis.eps_max must lie in (0, 1)")
    eps = sec.get("eps_grid") or list(np.linspace(0.0, eps_max, 96))
    eps = [float(e) for e in eps if float(e) <= eps_max]
    nus = sec.get("nu_grid") or [ch.nu]
    d = int(sec.get("d", 1))
    mi_alpha = sec.get("mi_alpha")
    name, k = unit(args.bits)
    rows, cross = [], []
    for nu in nus:
        nu = float(nu)
        for curve in rate_curves(nu, ch.f, eps, d=d, tol=float(sec.get("tol", 1e-10)),
                                 mi_alpha=None if mi_alpha is None else float(mi_alpha)):
            for e, r in curve.points:
                rows.append([curve.procedure, nu, e, r * k, curve.argmax_q])
        if d == 1:
            cross.append([nu, crossover_epsilon(nu, ch.f)])
    emit(args.out, ["procedure", "nu", "epsilon", f"rate_{name}", "argmax_q"], rows)
    if args.out and cross:
        write_rows(args.out + ".crossover.csv", ["nu", "crossover_epsilon"], cross)
    return 0


def _overrides(args) -> dict:
    return dict(
        procedure=getattr(args, "procedure", None),
        n_trials=args.trials,
        master_seed=args.seed,
        workers=args.workers,
    )


def cmd_simulate(doc, args) -> int:
    points = cfgmod.sweep_configs(doc, _overrides(args))
    summaries, labels, all_rows = [], [], []
    for pt in points:
        summary, records = run_experiment(pt.config)
        summaries.append(summary)
        labels.append(pt.label)
        all_rows.append((pt.label, records))
        print(_describe(pt.label, summary), file=sys.stderr)
    if args.out:
        from pathlib import Path

        out = Path(args.out)
        if len(all_rows) == 1:
            write_trials_csv(out, all_rows[0][1], all_rows[0][0])
        else:
            # one file, sweep value as leading column
            _write_sweep_trials(out, all_rows)
        write_summary_csv(out.with_suffix(".summary.csv"), summaries, labels)
    else:
        rows = [dict(**lab, **summary_row(s)) for lab, s in zip(labels, summaries)]
        emit(None, list(rows[0]), ([r[h] for h in rows[0]] for r in rows))
    return 0


def _write_sweep_trials(out, all_rows) -> None:
    from .harness import TRIAL_COLUMNS

    key = list(all_rows[0][0])
    rows = (
        [*lab.values(), *(getattr(r, c) for c in TRIAL_COLUMNS)]
        for lab, recs in all_rows for r in recs
    )
    write_rows(out, key + TRIAL_COLUMNS, rows)


def _describe(label, s) -> str:
    head = " ".join(f"{k}={v}" for k, v in label.items())
    q = s.log_resolution_quantiles.get(0.9)
    tail = f" -log(res@0.9)={-q:.4g}" if q is not None else ""
    return (f"{head} {s.procedure}: mean tau={s.mean_tau:.4g}±{s.tau_errbar:.2g} "
            f"excess={s.excess_prob:.4g}±{s.excess_errbar:.2g}{tail}").strip()


def cmd_validate(doc, args) -> int:
    cfg = cfgmod.experiment_config(doc, _overrides(args))
    if not cfg.procedure.startswith("alg"):
        raise cfgmod.ConfigError("validate-t1 needs procedure alg1 or alg2")
    report = validate_theorem1(cfg)
    row = asdict(report)
    row["passed"] = report.passed
    emit(args.out, list(row), [list(row.values())])
    if report.diagnosis:
        print(report.diagnosis, file=sys.stderr)
    return EXIT_CAPPED if report.cap_contaminated else 0


def cmd_continuity(doc, args) -> int:
    ch = cfgmod.build_channel(doc)
    sec = doc.get("continuity")
    if not sec or not {"q", "xi", "c"} <= set(sec):
        raise cfgmod.ConfigError("check-continuity needs continuity.q, .xi and .c")
    try:
        rep = check_continuity(ch, float(sec["q"]), float(sec["xi"]), float(sec["c"]))
    except ValueError as exc:
        raise cfgmod.ConfigError(str(exc)) from exc
    row = asdict(rep)
    emit(args.out, list(row), [list(row.values())])
    return 0


COMMANDS = {
    "capacity": cmd_capacity,
    "rate-curves": cmd_rate_curves,
    "simulate": cmd_simulate,
    "validate-t1": cmd_validate,
    "check-continuity": cmd_continuity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisy20q", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        if name in ("capacity", "rate-curves"):
            p.add_argument("--bits", action="store_true", help="report rates in bits")
        if name in ("simulate", "validate-t1"):
            p.add_argument("--seed", type=int)
            p.add_argument("--trials", type=int)
            p.add_argument("--workers", type=int)
        if name == "simulate":
            p.add_argument("--procedure", choices=["alg1", "alg2", "sorted-pm", "sorted-pm-terminated",
                                                   "sorted_pm", "sorted_pm_terminated"])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = cfgmod.load_document(args.config)
        return COMMANDS[args.command](doc, args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
