"""P-optimal criterion of the heat-equation posterior: estimates vs the dense oracle."""

import argparse
import time

from schatten.montecarlo import schatten_exact
from schatten.oed import HeatModel, PosteriorCovOp, dense_posterior_cov, posterior_schatten


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=254)
    ap.add_argument("--M", type=int, default=10**4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    model = HeatModel(nx=args.nx)
    op = PosteriorCovOp(model, solver="woodbury")
    G = dense_posterior_cov(model)
    for p, method, N in [(1, "mc", None), (5, "mc", None), (120, "mc", None),
                         (120, "cheby", 10), (120, "cheby", 20), (7.5, "cheby", 20)]:
        exact = schatten_exact(G, p)
        t0 = time.perf_counter()
        rep = posterior_schatten(model, p, method, args.M, N, seed=args.seed, op=op)
        print(f"p={p:<6g} {method:5s} N={N or '-':<3} estimate {rep.value:.6g} exact {exact:.6g} "
              f"rel err {abs(rep.value / exact - 1):.2e} matvecs {rep.matvecs} "
              f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
