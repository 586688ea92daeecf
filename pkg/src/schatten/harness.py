"""Error envelopes over repeated estimator realizations.

For every ``(M, N)`` cell of a plan the estimator is run ``R`` times with
independent probe streams; the table records mean relative error, the 2.5%
and 97.5% nearest-rank quantiles, the mean matvec count and mean wall time
per realization.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .chebyshev import SpectralInterval, cheby_schatten_estimate
from .montecarlo import McConfig, resolve_threads, schatten_estimate, schatten_from_eigenvalues
from .sources import Source, resolve
from .spectrum import estimate_interval

SCHEMA_VERSION = 1
CSV_COLUMNS = ["family", "p", "method", "M", "N", "mean_rel_err", "q025", "q975",
               "matvecs", "seconds", "schema_version"]
# envelopes need a dense oracle
MAX_ORACLE_DIM = 5000


class PlanError(ValueError):
    """Malformed experiment plan."""


@dataclass
class ExperimentPlan:
    matrix: str
    p: float
    estimator: str = "mc"
    M_grid: list = field(default_factory=lambda: [10, 100, 1000])
    N_grid: list | None = None
    R: int = 500
    seed: int = 0
    distribution: str = "gaussian"
    interval: object = "exact"
    common_probes: bool = False
    lanczos_steps: int = 30
    threads: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.estimator not in ("mc", "cheby"):
            raise PlanError(f"estimator must be 'mc' or 'cheby', got {self.estimator!r}")
        _check_grid("M_grid", self.M_grid)
        if self.estimator == "cheby":
            if not self.N_grid:
                raise PlanError("a Chebyshev plan needs a nonempty N_grid")
            _check_grid("N_grid", self.N_grid)
        elif self.N_grid:
            raise PlanError("N_grid only applies to the Chebyshev estimator")
        if self.R < 2:
            raise PlanError(f"R must be at least 2, got {self.R}")
        if self.p < 1:
            raise PlanError(f"p must be at least 1, got {self.p}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise PlanError(f"unknown plan keys {sorted(unknown)}")
        if "matrix" not in d or "p" not in d:
            raise PlanError("plan needs at least 'matrix' and 'p'")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentPlan":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PlanError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(d, dict):
            raise PlanError(f"{path}: plan must be a JSON object")
        return cls.from_dict(d)


def _check_grid(name, grid):
    if not grid or not all(isinstance(g, int) and g >= 1 for g in grid):
        raise PlanError(f"{name} must be a nonempty list of positive integers, got {grid!r}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise PlanError(f"{name} must be strictly increasing without duplicates, got {grid!r}")


@dataclass
class EnvelopeCell:
    M: int
    N: int | None
    mean_rel_err: float
    q025: float
    q975: float
    matvecs: float
    seconds: float
    errors: np.ndarray = field(repr=False)


@dataclass
class Envelope:
    family: str
    p: float
    method: str
    exact: float
    cells: list
    plateau: dict = field(default_factory=dict)

    def cell(self, M: int, N: int | None = None) -> EnvelopeCell:
        for c in self.cells:
            if c.M == M and c.N == N:
                return c
        raise KeyError((M, N))

    def column(self, N: int | None = None) -> list:
        return [c for c in self.cells if c.N == N]

    def rows(self) -> list[dict]:
        return [{"family": self.family, "p": self.p, "method": self.method, "M": c.M,
                 "N": "" if c.N is None else c.N, "mean_rel_err": c.mean_rel_err,
                 "q025": c.q025, "q975": c.q975, "matvecs": c.matvecs, "seconds": c.seconds,
                 "schema_version": SCHEMA_VERSION} for c in self.cells]

    def write_csv(self, target) -> None:
        """Write to a path or an open text file."""
        if hasattr(target, "write"):
            w = csv.DictWriter(target, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(self.rows())
            return
        with open(target, "w", newline="") as fh:
            self.write_csv(fh)

    def to_json(self) -> str:
        cells = []
        for c in self.cells:
            d = asdict(c)
            d.pop("errors")
            cells.append(d)
        return json.dumps({"schema_version": SCHEMA_VERSION, "family": self.family, "p": self.p,
                           "method": self.method, "exact": self.exact, "cells": cells,
                           "plateau": {str(k): v for k, v in self.plateau.items()}}, indent=2)


def quantile(sorted_sample, level: float) -> float:
    """Nearest-rank quantile: the element of 1-based rank ``ceil(level * R)``."""
    R = len(sorted_sample)
    if R == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must lie in [0, 1], got {level}")
    rank = math.ceil(round(level * R, 9))
    return float(sorted_sample[min(max(rank, 1), R) - 1])


def derive_seed(base: int, M: int, N: int | None, r: int) -> int:
    """64-bit probe seed for realization ``r`` of cell ``(M, N)``."""
    key = (int(M), 0 if N is None else int(N) + 1, int(r))
    ss = np.random.SeedSequence(int(base) & ((1 << 64) - 1), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def loglog_slope(Ms, errs) -> float:
    """Least-squares slope of log(err) against log(M)."""
    x, y = np.log(np.asarray(Ms, float)), np.log(np.asarray(errs, float))
    return float(np.polyfit(x, y, 1)[0])


def _resolve_interval(plan: ExperimentPlan, src: Source) -> SpectralInterval:
    iv = plan.interval
    if iv == "exact":
        lam = src.exact_eigenvalues()
        return SpectralInterval(float(lam.min()), float(lam.max()))
    if iv == "lanczos":
        return estimate_interval(src.op, min(plan.lanczos_steps, src.op.dim), plan.seed)
    a, b = iv
    return SpectralInterval(float(a), float(b))


def run_envelope(plan: ExperimentPlan, source: Source | None = None) -> Envelope:
    """Run every cell of ``plan``.  Deterministic given the plan, apart from timings."""
    src = resolve(plan.matrix) if source is None else source
    if src.eigenvalues is None and src.op.dim > MAX_ORACLE_DIM:
        raise PlanError(f"dimension {src.op.dim} is too large for a dense oracle")
    exact = schatten_from_eigenvalues(src.exact_eigenvalues(), plan.p)
    if exact <= 0:
        raise PlanError("exact norm is zero; relative errors are undefined")
    interval = _resolve_interval(plan, src) if plan.estimator == "cheby" else None

    def realization(M, N, r):
        seed = derive_seed(plan.seed, M, None if plan.common_probes else N, r)
        op = src.op.view()
        t0 = time.perf_counter()
        if plan.estimator == "mc":
            rep = schatten_estimate(op, McConfig(plan.p, M, seed, plan.distribution, 1, False))
        else:
            rep = cheby_schatten_estimate(op, interval, plan.p, N, M, seed, plan.distribution,
                                          1, False)
        return abs(rep.value - exact) / exact, op.matvecs, time.perf_counter() - t0

    cells = []
    nthreads = resolve_threads(plan.threads)
    for N in (plan.N_grid or [None]):
        for M in plan.M_grid:
            jobs = [(M, N, r) for r in range(plan.R)]
            if nthreads > 1:
                with ThreadPoolExecutor(nthreads) as pool:
                    out = list(pool.map(lambda a: realization(*a), jobs))
            else:
                out = [realization(*a) for a in jobs]
            errs = np.array([o[0] for o in out])
            srt = np.sort(errs)
            cells.append(EnvelopeCell(
                M=M, N=N, mean_rel_err=math.fsum(errs) / len(errs),
                q025=quantile(srt, 0.025), q975=quantile(srt, 0.975),
                matvecs=math.fsum(o[1] for o in out) / len(out),
                seconds=math.fsum(o[2] for o in out) / len(out), errors=errs))
    env = Envelope(src.label, plan.p, plan.estimator, exact, cells)
    if plan.estimator == "cheby":
        env.plateau = plateau_flags(env)
    return env


def plateau_flags(env: Envelope) -> dict:
    """Per degree ``N``: True when the largest-M error has not fallen below half the smallest-M error."""
    flags = {}
    for N in sorted({c.N for c in env.cells}):
        col = sorted(env.column(N), key=lambda c: c.M)
        flags[N] = bool(col[-1].mean_rel_err >= 0.5 * col[0].mean_rel_err) if len(col) > 1 else False
    return flags


def n_sweep(plan: ExperimentPlan, source: Source | None = None) -> Envelope:
    if plan.estimator != "cheby":
        raise PlanError("an N sweep needs the Chebyshev estimator")
    return run_envelope(plan, source)
