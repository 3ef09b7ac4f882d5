"""Compare realized stopping times and excess probability with the
first-passage bounds E[tau_1] and (M - 1) Pr{tau_1 >= tau_2}.

    python scripts/first_passage_check.py --M 16 --trials 10000
"""

import argparse
from dataclasses import asdict

from noisy20q.analysis import capacity_bsc
from noisy20q.channel import LipschitzFn, MdBSC
from noisy20q.engine import ProcedureConfig, choose_lambda
from noisy20q.harness import ExperimentConfig, validate_theorem1


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=16)
    ap.add_argument("--nu", type=float, default=0.5)
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--b", type=float, default=0.3)
    ap.add_argument("--target-eps", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    f = LipschitzFn(args.a, args.b)
    ch = MdBSC(args.nu, f)
    proc = ProcedureConfig(M=args.M, q=capacity_bsc(args.nu, f).argmax_q,
                           lam=choose_lambda(args.M, 1, args.target_eps))
    cfg = ExperimentConfig("alg1", ch, proc=proc, n_trials=args.trials,
                           master_seed=args.seed, workers=args.workers)
    rep = validate_theorem1(cfg)
    for k, v in asdict(rep).items():
        print(f"{k:>22}: {v}")
    print(f"{'passed':>22}: {rep.passed}")


if __name__ == "__main__":
    main()
