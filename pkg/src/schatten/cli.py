"""Command-line interface.

Exit codes: 0 success, 1 usage error (bad flags, unparseable input),
2 numerical or validation failure (non-PSD operator, asymmetric file,
solver breakdown, spectrum outside the interval).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys

import numpy as np

from . import chebyshev, harness, matgen, montecarlo, oed, sources, spectrum
from .linops import DenseSym, SparseSym, SymmetryError

SCHEMA_VERSION = 1
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

log = logging.getLogger("schatten")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


USAGE_ERRORS = (UsageError, sources.SourceError, harness.PlanError, montecarlo.NonIntegerPowerError,
                oed.ObservationAlignmentError, FileNotFoundError, IsADirectoryError)
NUMERICAL_ERRORS = (montecarlo.NotSPSDError, montecarlo.NegativeMeanError, oed.CGConvergenceError,
                    chebyshev.SpectrumViolationError, matgen.MatrixMarketError, SymmetryError,
                    spectrum.NotSPDError, np.linalg.LinAlgError)


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None
    return a, b


def _seed(text: str) -> int:
    try:
        s = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a decimal integer, got {text!r}") from None
    if not 0 <= s < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2^64), got {s}")
    return s


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, or (interactive sessions only) a fresh one echoed to stderr."""
    if seed is not None:
        return seed
    if not (sys.stdin.isatty() and sys.stdout.isatty()):
        raise UsageError("--seed is required when not running interactively")
    seed = secrets.randbits(63)
    print(f"using seed {seed}", file=sys.stderr)
    return seed


def _emit(obj: dict) -> None:
    print(json.dumps({"schema_version": SCHEMA_VERSION, **obj}, indent=2))


def _report(rep: montecarlo.EstimateReport, **extra) -> None:
    _emit({**rep.to_dict(), **extra})


def _add_common(p, threads=True, seed=True):
    if seed:
        p.add_argument("--seed", type=_seed, help="decimal 64-bit probe seed")
        p.add_argument("--dist", choices=("gaussian", "rademacher"), default="gaussian")
    if threads:
        p.add_argument("--threads", type=_positive_int,
                       help="worker threads (default: $SCHATTEN_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="schatten", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exact", help="dense-oracle Schatten norm")
    p.add_argument("--matrix", required=True)
    p.add_argument("--p", type=float, required=True)

    p = sub.add_parser("estimate", help="Monte Carlo or Chebyshev estimate")
    p.add_argument("--matrix", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--M", type=_positive_int, required=True)
    p.add_argument("--method", choices=("mc", "cheby"), default="mc")
    p.add_argument("--N", type=_positive_int)
    p.add_argument("--interval", type=_pair, help="spectral interval 'a,b' (cheby)")
    p.add_argument("--lanczos-steps", type=_positive_int, default=30)
    p.add_argument("--strict", action="store_true",
                   help="fail when the spectrum leaves the interval")
    _add_common(p)

    p = sub.add_parser("bounds", help="sample-size and degree bounds")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--variant", choices=("mc", "cheby"), default="mc")

    p = sub.add_parser("experiment", help="error-envelope experiment from a JSON plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--csv", help="CSV output path (default: plan 'output' + .csv)")
    p.add_argument("--json", dest="json_out", help="JSON output path")
    p.add_argument("--threads", type=_positive_int)

    p = sub.add_parser("oed", help="P-optimal criterion of the heat-equation posterior")
    p.add_argument("--nx", type=_positive_int, default=254)
    p.add_argument("--nt", type=_positive_int, default=100)
    p.add_argument("--diffusion", type=float, default=2e-4)
    p.add_argument("--sigma", type=float, default=0.002)
    p.add_argument("--gamma", type=float, default=1e-4)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--method", choices=("mc", "cheby"), default="mc")
    p.add_argument("--M", type=_positive_int, default=1000)
    p.add_argument("--N", type=_positive_int)
    p.add_argument("--interval", type=_pair)
    p.add_argument("--solver", choices=("woodbury", "cg"), default="woodbury")
    p.add_argument("--exact", action="store_true", help="also report the dense-oracle norm")
    p.add_argument("--export-dense", metavar="PATH",
                   help="write the dense posterior covariance as Matrix Market")
    _add_common(p)

    p = sub.add_parser("gen", help="write a test matrix to Matrix Market")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("coeffs", help="export Chebyshev coefficients of x^q as JSON")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--interval", type=_pair, required=True)
    p.add_argument("--N", type=int, required=True)
    return ap


def cmd_exact(args) -> None:
    if args.p < 1:
        raise UsageError(f"--p must be at least 1, got {args.p}")
    src = sources.resolve(args.matrix)
    value = montecarlo.schatten_from_eigenvalues(src.exact_eigenvalues(), args.p)
    _emit({"value": value, "n": src.op.dim, "p": args.p, "matrix": args.matrix})


def cmd_estimate(args) -> None:
    src = sources.resolve(args.matrix)
    seed = resolve_seed(args.seed)
    if not src.op.spd:
        log.warning("%s is not advertised positive semi-definite", args.matrix)
    if args.method == "mc":
        if args.N is not None or args.interval is not None:
            raise UsageError("--N and --interval apply only to --method cheby")
        try:
            cfg = montecarlo.McConfig(args.p, args.M, seed, args.dist, args.threads)
        except montecarlo.NonIntegerPowerError as exc:
            raise UsageError(f"{exc} (try --method cheby --N <degree>)") from None
        _report(montecarlo.schatten_estimate(src.op, cfg), matrix=args.matrix)
        return
    if args.N is None:
        raise UsageError("--method cheby needs --N")
    if args.p < 1:
        raise UsageError(f"--p must be at least 1, got {args.p}")
    if args.N >= args.p / 2:
        log.warning("N = %d >= p/2 = %g: the exact-power estimator is cheaper", args.N, args.p / 2)
    if args.interval is None:
        steps = min(args.lanczos_steps, src.op.dim)
        interval = spectrum.estimate_interval(src.op.view(), steps, seed)
    else:
        interval = _interval(args.interval)
    rep = chebyshev.cheby_schatten_estimate(src.op, interval, args.p, args.N, args.M, seed,
                                            args.dist, args.threads, strict=args.strict)
    _report(rep, matrix=args.matrix)


def _interval(pair) -> chebyshev.SpectralInterval:
    try:
        return chebyshev.SpectralInterval(*pair)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_bounds(args) -> None:
    out = {"epsilon": args.epsilon, "variant": args.variant}
    try:
        if args.delta is not None:
            out["delta"] = args.delta
            fn = montecarlo.sample_bound if args.variant == "mc" else montecarlo.cheby_sample_bound
            out["M"] = fn(args.epsilon, args.delta)
        if (args.p is None) != (args.kappa is None):
            raise UsageError("--p and --kappa must be given together")
        if args.p is not None:
            out.update(p=args.p, kappa=args.kappa,
                       N=chebyshev.degree_bound(args.epsilon, args.p, args.kappa))
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if "M" not in out and "N" not in out:
        raise UsageError("give --delta (sample bound) and/or --p with --kappa (degree bound)")
    _emit(out)


def cmd_experiment(args) -> None:
    plan = harness.ExperimentPlan.from_json(args.plan)
    if args.threads is not None:
        plan.threads = args.threads
    env = harness.run_envelope(plan)
    csv_path = args.csv or (plan.output + ".csv" if plan.output else None)
    json_path = args.json_out or (plan.output + ".json" if plan.output else None)
    for path in (csv_path, json_path):
        if path and os.path.dirname(path):
            os.makedirs(os.path.dirname(path), exist_ok=True)
    if csv_path:
        env.write_csv(csv_path)
    if json_path:
        with open(json_path, "w") as fh:
            fh.write(env.to_json())
    if not csv_path:
        env.write_csv(sys.stdout)


def cmd_oed(args) -> None:
    model = oed.HeatModel(nx=args.nx, nt=args.nt, k=args.diffusion, sigma=args.sigma,
                          gamma=args.gamma)
    seed = resolve_seed(args.seed)
    if args.method == "cheby" and args.N is None:
        raise UsageError("--method cheby needs --N")
    if args.method == "mc":
        try:
            montecarlo.as_integer_power(args.p)
        except montecarlo.NonIntegerPowerError as exc:
            raise UsageError(f"{exc} (try --method cheby --N <degree>)") from None
    op = oed.PosteriorCovOp(model, solver=args.solver)
    interval = _interval(args.interval) if args.interval else None
    rep = oed.posterior_schatten(model, args.p, args.method, args.M, args.N, interval, seed,
                                 args.dist, args.threads, op=op)
    extra = {"model": {"nx": model.nx, "nt": model.nt, "diffusion": model.k,
                       "sigma": model.sigma, "gamma": model.gamma, "solver": args.solver}}
    if args.exact or args.export_dense:
        G = oed.dense_posterior_cov(model)
        if args.export_dense:
            matgen.write_matrix_market(args.export_dense, G, comment="dense posterior covariance")
        if args.exact:
            exact = montecarlo.schatten_exact(G, args.p)
            extra.update(exact=exact, rel_err=abs(rep.value - exact) / exact)
    _report(rep, **extra)


def cmd_gen(args) -> None:
    src = sources.resolve(args.matrix)
    A = src.op if isinstance(src.op, (DenseSym, SparseSym)) else src.op.to_dense()
    matgen.write_matrix_market(args.out, A, comment=f"generated from {args.matrix}")
    _emit({"path": args.out, "n": src.op.dim, "matrix": args.matrix})


def cmd_coeffs(args) -> None:
    if args.N < 0:
        raise UsageError(f"--N must be non-negative, got {args.N}")
    try:
        model = chebyshev.cheby_coeffs(args.q, _interval(args.interval), args.N)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(model.to_json())


COMMANDS = {"exact": cmd_exact, "estimate": cmd_estimate, "bounds": cmd_bounds,
            "experiment": cmd_experiment, "oed": cmd_oed, "gen": cmd_gen, "coeffs": cmd_coeffs}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except NUMERICAL_ERRORS as exc:
        print(f"schatten {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except USAGE_ERRORS + (ValueError,) as exc:
        # remaining ValueErrors come from out-of-range arguments
        print(f"schatten {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
