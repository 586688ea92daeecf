"""Chebyshev degree sweep: mean relative error over (M, N) for one family."""

import argparse

from schatten.harness import ExperimentPlan, n_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--matrix", default="synth:linear:100")
    ap.add_argument("--p", type=float, default=120)
    ap.add_argument("--N", nargs="+", type=int, default=[5, 10, 20, 60])
    ap.add_argument("--M", nargs="+", type=int, default=[10, 100, 1000])
    ap.add_argument("--R", type=int, default=100)
    ap.add_argument("--interval", default="exact", help="exact | lanczos | a,b")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()
    interval = args.interval
    if "," in interval:
        interval = [float(v) for v in interval.split(",")]
    env = n_sweep(ExperimentPlan(args.matrix, args.p, "cheby", args.M, args.N, R=args.R,
                                 seed=args.seed, interval=interval))
    print(f"{'N':>4} " + " ".join(f"M={M:<9d}" for M in args.M) + " plateau")
    for N in args.N:
        row = " ".join(f"{c.mean_rel_err:<11.3e}" for c in env.column(N))
        print(f"{N:>4} {row} {env.plateau[N]}")
    if args.csv:
        env.write_csv(args.csv)


if __name__ == "__main__":
    main()
