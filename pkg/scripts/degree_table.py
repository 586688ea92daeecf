"""Table of Chebyshev degrees and sample counts from the a priori bounds."""

import argparse

from schatten.chebyshev import degree_bound
from schatten.montecarlo import cheby_sample_bound, sample_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--p", nargs="+", type=float, default=[2, 4, 10, 40, 120])
    ap.add_argument("--kappa", nargs="+", type=float, default=[1.5, 2, 10, 100, 1e4])
    args = ap.parse_args()
    print(f"M (exact power) = {sample_bound(args.epsilon, args.delta)}, "
          f"M (Chebyshev) = {cheby_sample_bound(args.epsilon, args.delta)}")
    print("p \\ kappa " + "".join(f"{k:>10g}" for k in args.kappa))
    for p in args.p:
        print(f"{p:<10g}" + "".join(f"{degree_bound(args.epsilon, p, k):>10d}" for k in args.kappa))


if __name__ == "__main__":
    main()
