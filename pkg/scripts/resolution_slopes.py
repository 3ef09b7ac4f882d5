"""Resolution quantile versus number of queries for the adaptive procedure
and sorted posterior matching, with fitted slopes.

    python scripts/resolution_slopes.py --f inc --trials 300 [--plot results/resolution_inc.png]
"""

import argparse
from pathlib import Path

import numpy as np

from noisy20q import config as cfgmod
from noisy20q.analysis import capacity_bsc, sorted_pm_rate
from noisy20q.harness import fit_slope, run_trials, write_rows

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def sweep(path, trials, workers, level, x_of):
    doc = cfgmod.load_document(path)
    over = dict(n_trials=trials, workers=workers)
    xs, ys = [], []
    for pt in cfgmod.sweep_configs(doc, over):
        recs = run_trials(pt.config)
        logs = np.array([r.log_resolution for r in recs])
        xs.append(x_of(pt, recs))
        ys.append(-float(np.quantile(logs, level, method="inverted_cdf")))
        print(f"  {pt.label} x={xs[-1]:.1f} -log(res@{level})={ys[-1]:.2f}")
    return xs, ys, cfgmod.build_channel(doc)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--f", dest="panel", choices=["inc", "dec"], default="inc",
                    help="increasing or decreasing state map")
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--level", type=float, default=0.9)
    ap.add_argument("--out")
    ap.add_argument("--plot")
    args = ap.parse_args()
    out = args.out or f"results/resolution_{args.panel}.csv"

    rows = []
    print("adaptive procedure")
    xs, ys, ch = sweep(CONFIGS / f"resolution_{args.panel}_alg1.yaml", args.trials, args.workers,
                       args.level, lambda pt, recs: float(np.mean([r.tau for r in recs])))
    fit = fit_slope(xs, ys)
    cap = capacity_bsc(ch.nu, ch.f).value
    print(f"  slope {fit.slope:.4f} vs capacity {cap:.4f} (ratio {fit.slope / cap:.3f})")
    rows += [["alg1", x, y] for x, y in zip(xs, ys)]
    series = [("alg1", xs, ys, fit)]

    print("sorted posterior matching")
    xs, ys, ch = sweep(CONFIGS / f"resolution_{args.panel}_sorted_pm.yaml", args.trials, args.workers,
                       args.level, lambda pt, recs: pt.config.pm.n_queries)
    fit = fit_slope(xs, ys)
    rate = sorted_pm_rate(ch.nu, ch.f)
    print(f"  slope {fit.slope:.4f} vs rate {rate:.4f} (ratio {fit.slope / rate:.3f})")
    rows += [["sorted_pm", x, y] for x, y in zip(xs, ys)]
    series.append(("sorted_pm", xs, ys, fit))

    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_rows(out, ["procedure", "queries", f"neg_log_resolution_q{args.level}"], rows)

    if args.plot:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        for name, x, y, ft in series:
            ax.plot(x, y, "o", label=name)
            grid = np.linspace(0, max(x), 50)
            ax.plot(grid, ft.slope * grid + ft.intercept, ":")
        ax.set_xlabel("number of queries")
        ax.set_ylabel(f"-log resolution ({args.level} quantile)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)


if __name__ == "__main__":
    main()
