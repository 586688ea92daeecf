"""Plain Monte Carlo estimation of Schatten p-norms of SPSD operators.

The estimator averages quadratic forms ``w^T A^p w`` over probe vectors and
takes the p-th root of the mean.  With ``K = floor(p / 2)`` each sample costs
``ceil(p / 2)`` matvecs: ``y = A^K w`` and then either ``y^T y`` (p even) or
``y^T A y`` (p odd).
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linops import DenseSym, LinearOperator
from .probes import ProbeStream

# columns per block; fixed so results never depend on the worker count
BLOCK_ENTRIES = 1 << 20
STREAMING_THRESHOLD = 10**6


class NotSPSDError(ValueError):
    """The operator is not symmetric positive semi-definite."""


class NonIntegerPowerError(ValueError):
    """Raised when the exact-power estimator receives a non-integer p."""


class NegativeMeanError(ArithmeticError):
    """The accumulated mean of quadratic forms is negative (operator not PSD)."""


@dataclass
class McConfig:
    p: int
    M: int
    seed: int = 0
    distribution: str = "gaussian"
    threads: int | None = None
    keep_samples: bool | None = None

    def __post_init__(self):
        self.p = as_integer_power(self.p)
        if self.M < 1:
            raise ValueError(f"M must be at least 1, got {self.M}")


@dataclass
class EstimateReport:
    value: float
    p_power_mean: float
    samples: np.ndarray | None
    matvecs: int
    elapsed: float
    p: float
    M: int
    method: str = "mc"
    N: int | None = None
    n: int | None = None
    seed: int | None = None
    distribution: str = "gaussian"
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, include_samples: bool = False) -> dict:
        out = {
            "value": self.value,
            "p": self.p,
            "method": self.method,
            "M": self.M,
            "N": self.N,
            "matvecs": self.matvecs,
            "seed": self.seed,
            "elapsed_s": self.elapsed,
            "p_power_mean": self.p_power_mean,
            "n": self.n,
            "distribution": self.distribution,
            "diagnostics": self.diagnostics,
        }
        if include_samples and self.samples is not None:
            out["samples"] = self.samples.tolist()
        return out


def as_integer_power(p) -> int:
    if isinstance(p, (int, np.integer)):
        ip = int(p)
    else:
        pf = float(p)
        if not pf.is_integer():
            raise NonIntegerPowerError(
                f"p = {p} is not an integer; the exact-power estimator needs integer p, "
                "use the Chebyshev estimator for non-integer p"
            )
        ip = int(pf)
    if ip < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    return ip


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("SCHATTEN_THREADS", "1") or 1)
    return max(1, int(threads))


def block_ranges(M: int, dim: int):
    width = max(1, BLOCK_ENTRIES // dim)
    return [(s, min(width, M - s)) for s in range(0, M, width)]


def run_samples(sample_fn: Callable[[int, int], np.ndarray], M: int, dim: int,
                threads: int | None, keep_samples: bool | None):
    """Evaluate per-sample quadratic forms block by block.

    Returns ``(mean, samples_or_None)``.  Each block is summed exactly with
    ``math.fsum`` and the block sums are combined with ``math.fsum`` in block
    order, so the reduction is deterministic whatever the thread count.
    """
    if keep_samples is None:
        keep_samples = M <= STREAMING_THRESHOLD
    ranges = block_ranges(M, dim)
    nthreads = min(resolve_threads(threads), len(ranges))

    def work(rng):
        vals = np.asarray(sample_fn(*rng), dtype=float)
        return math.fsum(vals), (vals if keep_samples else None)

    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(work, ranges))
    else:
        parts = [work(r) for r in ranges]
    total = math.fsum(s for s, _ in parts)
    samples = np.concatenate([v for _, v in parts]) if keep_samples else None
    return total / M, samples


def _finish(mean: float, p: float) -> float:
    if not mean >= 0:  # also catches NaN
        raise NegativeMeanError(
            f"accumulated mean of quadratic forms is {mean!r}; the operator is not PSD "
            "(or the spectral interval does not enclose its spectrum)"
        )
    return mean ** (1.0 / p)


def schatten_estimate(op: LinearOperator, cfg: McConfig) -> EstimateReport:
    """Monte Carlo estimate of ``||A||_p`` for integer ``p``."""
    p = cfg.p
    K = p // 2
    stream = ProbeStream(op.dim, cfg.seed, cfg.distribution)

    def samples(start, count):
        Y = stream.block(start, count)
        for _ in range(K):
            Y = op.apply_block(Y)
        Z = op.apply_block(Y) if p % 2 else Y
        return np.einsum("ij,ij->j", Y, Z)

    before = op.matvecs
    t0 = time.perf_counter()
    mean, vals = run_samples(samples, cfg.M, op.dim, cfg.threads, cfg.keep_samples)
    value = _finish(mean, p)
    elapsed = time.perf_counter() - t0
    return EstimateReport(
        value=value, p_power_mean=mean, samples=vals, matvecs=op.matvecs - before,
        elapsed=elapsed, p=p, M=cfg.M, method="mc", n=op.dim, seed=cfg.seed,
        distribution=cfg.distribution,
    )


def trace_estimate(op: LinearOperator, M: int, seed: int = 0,
                   distribution: str = "gaussian", threads: int | None = None) -> EstimateReport:
    """Hutchinson-type trace estimate; identical to ``schatten_estimate`` with p = 1."""
    return schatten_estimate(op, McConfig(1, M, seed, distribution, threads))


def spsd_eigenvalues(A, tol: float = 1e-10) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, clipped at zero.

    Raises :class:`NotSPSDError` if any eigenvalue is below ``-tol * max|lambda|``.
    """
    if isinstance(A, DenseSym):
        M = A.matrix
    elif isinstance(A, LinearOperator):
        M = A.to_dense()
    else:
        M = np.asarray(A, dtype=float)
    lam = np.linalg.eigvalsh(M)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    if lam.size and lam[0] < -tol * scale:
        raise NotSPSDError(f"smallest eigenvalue {lam[0]:.3e} is below -{tol:g} * {scale:.3e}")
    return np.clip(lam, 0.0, None)


def schatten_from_eigenvalues(lam, p: float) -> float:
    lam = np.asarray(lam, dtype=float)
    top = lam.max() if lam.size else 0.0
    if top == 0.0:
        return 0.0
    # scaled so that large p cannot overflow
    return float(top * np.sum((lam / top) ** p) ** (1.0 / p))


def schatten_exact(A, p: float) -> float:
    """``(sum_j lambda_j^p)^(1/p)`` from a dense symmetric eigendecomposition."""
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    return schatten_from_eigenvalues(spsd_eigenvalues(A), p)


def _slack_ceil(x: float) -> int:
    # absorb rounding when x is mathematically an integer (also for inputs
    # such as delta = 2/e given to ten digits)
    return math.ceil(x * (1.0 - 1e-9))


def _check_eps_delta(epsilon: float, delta: float) -> None:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def sample_bound(epsilon: float, delta: float, constant: float = 8.0) -> int:
    """Samples sufficient for an (epsilon, delta) estimate: ``ceil(C eps^-2 ln(2/delta))``.

    ``C = 8`` for the exact-power estimator, ``C = 72`` for the Chebyshev one.
    """
    _check_eps_delta(epsilon, delta)
    return _slack_ceil(constant * math.log(2.0 / delta) / epsilon**2)


def cheby_sample_bound(epsilon: float, delta: float) -> int:
    return sample_bound(epsilon, delta, constant=72.0)


def variance_bound(A, p: float, M: int) -> float:
    """Upper bound ``2 ||A^p||_F^2 / (M ||A||_p^(2p-2))`` on the variance of the estimate."""
    lam = spsd_eigenvalues(A)
    top = lam.max() if lam.size else 0.0
    if top == 0.0:
        raise ValueError("variance bound is undefined for the zero matrix")
    mu = lam / top
    return float(2.0 * top**2 * np.sum(mu ** (2 * p)) / (M * np.sum(mu**p) ** (2.0 - 2.0 / p)))


def pth_power_variance(A, p: float, M: int = 1) -> float:
    """Gaussian-probe variance of the inner mean: ``2 ||A^p||_F^2 / M``."""
    lam = spsd_eigenvalues(A)
    return float(2.0 * np.sum(lam ** (2 * p)) / M)
