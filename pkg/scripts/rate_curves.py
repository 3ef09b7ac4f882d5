"""Rate curves versus the termination probability, plus crossover points.

    python scripts/rate_curves.py --out results/rate_curves.csv [--plot results/rate_curves.png]
"""

import argparse
import math
from pathlib import Path

import numpy as np

from noisy20q.analysis import crossover_epsilon, rate_curves
from noisy20q.channel import LipschitzFn
from noisy20q.harness import write_rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--b", type=float, default=0.3)
    ap.add_argument("--nu", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8, 1.0])
    ap.add_argument("--eps-max", type=float, default=0.95)
    ap.add_argument("--bits", action="store_true")
    ap.add_argument("--out", default="results/rate_curves.csv")
    ap.add_argument("--plot")
    args = ap.parse_args()

    f = LipschitzFn(args.a, args.b)
    eps = np.linspace(0.0, args.eps_max, 96)
    k = 1 / math.log(2) if args.bits else 1.0
    rows, cross, curves = [], [], []
    for nu in args.nu:
        for c in rate_curves(nu, f, eps):
            curves.append(c)
            rows += [[c.procedure, nu, e, r * k] for e, r in c.points]
        cross.append([nu, crossover_epsilon(nu, f)])
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_rows(args.out, ["procedure", "nu", "epsilon", "rate"], rows)
    write_rows(args.out + ".crossover.csv", ["nu", "crossover_epsilon"], cross)
    for nu, e in cross:
        print(f"nu={nu:g}: crossover epsilon = {e if e is None else round(e, 5)}")

    if args.plot:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for c in curves:
            if c.procedure == "alg2" or c.procedure == "sorted_pm":
                ls = "-" if c.procedure == "alg2" else "--"
                ax.plot(c.epsilons, c.rates * k, ls, label=f"{c.procedure} nu={c.nu:g}")
        ax.set_xlabel("epsilon")
        ax.set_ylabel("rate (bits)" if args.bits else "rate (nats)")
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)


if __name__ == "__main__":
    main()
