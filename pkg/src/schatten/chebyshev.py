"""Chebyshev approximation of ``x^q`` and the Chebyshev Monte Carlo estimator.

Polynomials live on a spectral interval ``[a, b]`` with ``a > 0`` and are
expanded in ``T_j(t)`` with ``t = (2x - (b + a)) / (b - a)``.  The leading
coefficient is stored already halved, so evaluation is always
``sum_j c_j T_j(t)``.

Estimating ``||A||_p`` uses ``psi_N(x) ~ x^(p/2)`` and the squared polynomial
``phi_N = psi_N^2``, which keeps the approximation of ``A^p`` positive
semi-definite: each sample contributes ``z^T z`` with ``z = psi_N(A) w``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .linops import LinearOperator
from .montecarlo import EstimateReport, _finish, _slack_ceil, run_samples
from .probes import ProbeStream

log = logging.getLogger(__name__)

COEFFS_SCHEMA_VERSION = 1
# |T_k(t)| <= 1 on [-1, 1]; growth beyond this means eigenvalues outside [a, b]
GROWTH_TOL = 1e-8


class SpectrumViolationError(ArithmeticError):
    """The spectral interval does not enclose the operator's spectrum."""


@dataclass(frozen=True)
class SpectralInterval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"spectral interval needs a > 0, got a = {self.a}")
        if self.b < self.a:
            raise ValueError(f"spectral interval needs b >= a, got [{self.a}, {self.b}]")

    @property
    def kappa(self) -> float:
        return math.sqrt(self.b / self.a)

    def to_unit(self, x):
        """Affine map of ``[a, b]`` onto ``[-1, 1]``."""
        return (2.0 * np.asarray(x, dtype=float) - (self.b + self.a)) / (self.b - self.a)

    def from_unit(self, t):
        return 0.5 * (self.b - self.a) * np.asarray(t, dtype=float) + 0.5 * (self.b + self.a)


def _as_interval(interval) -> SpectralInterval:
    if isinstance(interval, SpectralInterval):
        return interval
    a, b = interval
    return SpectralInterval(float(a), float(b))


@dataclass(frozen=True)
class ChebyshevModel:
    q: float
    interval: SpectralInterval
    coeffs: np.ndarray

    @property
    def N(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return cheby_eval(self, x)

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": COEFFS_SCHEMA_VERSION,
            "q": self.q,
            "interval": [self.interval.a, self.interval.b],
            "N": self.N,
            "convention": "c[0] stored halved; psi(x) = sum_j c[j] T_j((2x - (b+a)) / (b-a))",
            "coeffs": [float(c) for c in self.coeffs],
        })

    @classmethod
    def from_json(cls, text: str) -> "ChebyshevModel":
        d = json.loads(text)
        return cls(float(d["q"]), SpectralInterval(*d["interval"]), np.asarray(d["coeffs"], float))


def cheby_coeffs(q: float, interval, N: int) -> ChebyshevModel:
    """Degree-``N`` Chebyshev interpolant of ``x^q`` on ``[a, b]``.

    Samples ``x^q`` at the ``N + 1`` Chebyshev extreme points and converts the
    values to coefficients with a type-I DCT.  ``N = 0`` interpolates at the
    midpoint; ``a == b`` gives the exact constant ``a^q``.
    """
    iv = _as_interval(interval)
    if q <= 0:
        raise ValueError(f"exponent must be positive, got {q}")
    if N < 0:
        raise ValueError(f"degree must be non-negative, got {N}")
    c = np.zeros(N + 1)
    if iv.a == iv.b:
        c[0] = iv.a**q
    elif N == 0:
        c[0] = (0.5 * (iv.a + iv.b)) ** q
    else:
        t = np.cos(np.pi * np.arange(N + 1) / N)
        f = iv.from_unit(t) ** q
        c = dct(f, type=1) / N
        c[0] *= 0.5
        c[N] *= 0.5
    return ChebyshevModel(float(q), iv, c)


def clenshaw(coeffs, t):
    """Evaluate ``sum_j c_j T_j(t)``."""
    t = np.asarray(t, dtype=float)
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for c in coeffs[:0:-1]:
        b1, b2 = 2.0 * t * b1 - b2 + c, b1
    return t * b1 - b2 + coeffs[0]


def cheby_eval(model: ChebyshevModel, x):
    """Evaluate ``psi_N(x)``.  Points outside ``[a, b]`` are allowed but logged."""
    iv = model.interval
    x = np.asarray(x, dtype=float)
    slack = 1e-12 * iv.b
    if np.any((x < iv.a - slack) | (x > iv.b + slack)):
        log.warning("evaluating Chebyshev model outside [%g, %g]; error bound does not apply",
                    iv.a, iv.b)
    if iv.a == iv.b:
        out = np.full_like(x, model.coeffs[0])
    else:
        out = clenshaw(model.coeffs, iv.to_unit(x))
    return float(out) if out.ndim == 0 else out


def trefethen_bound(q: float, interval, N: int) -> float:
    """Uniform error bound ``4U / ((rho - 1) rho^N)`` for the interpolant of ``x^q``.

    ``rho = (kappa + 1) / (kappa - 1)`` with ``kappa = sqrt(b / a)`` and
    ``U = (b + a)^q``.
    """
    iv = _as_interval(interval)
    if iv.a == iv.b:
        return 0.0
    k = iv.kappa
    rho = (k + 1.0) / (k - 1.0)
    log_bound = math.log(4.0) + q * math.log(iv.b + iv.a) - math.log(rho - 1.0) - N * math.log(rho)
    return math.exp(log_bound) if log_bound < 709.0 else math.inf


def degree_bound(epsilon: float, p: float, kappa: float) -> int:
    """Smallest degree ``N`` for which ``|tr(phi_N(A)) - ||A||_p^p| <= (eps/2) ||A||_p^p``.

    Evaluated in logarithms so large ``p`` cannot overflow.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if kappa < 1.0:
        raise ValueError(f"kappa = sqrt(b/a) must be at least 1, got {kappa}")
    if kappa == 1.0:
        return 0
    q = p / 2.0
    # log(kappa^p + sqrt(eps/2 + kappa^(2p)))
    tail = p * math.log(kappa) + math.log1p(math.sqrt(1.0 + 0.5 * epsilon * kappa ** (-2.0 * p)))
    numer = (math.log(4.0 / epsilon) + q * math.log(kappa**2 + 1.0)
             + math.log(kappa - 1.0) + tail)
    denom = math.log((kappa + 1.0) / (kappa - 1.0))
    return max(0, _slack_ceil(numer / denom))


def phi_trace(model: ChebyshevModel, eigenvalues) -> float:
    """``tr(psi_N(A)^2)`` from the eigenvalues of ``A`` (dense oracle)."""
    vals = np.asarray(cheby_eval(model, np.asarray(eigenvalues, dtype=float)))
    return float(np.sum(vals**2))


def cheby_schatten_estimate(op: LinearOperator, interval, p: float, N: int, M: int,
                            seed: int = 0, distribution: str = "gaussian",
                            threads: int | None = None, keep_samples: bool | None = None,
                            strict: bool = False) -> EstimateReport:
    """Chebyshev Monte Carlo estimate of ``||A||_p`` for real ``p >= 1``.

    Runs the three-term recurrence on each probe; costs exactly ``N`` matvecs
    per sample.  ``strict=True`` raises :class:`SpectrumViolationError` when
    the recurrence shows eigenvalues outside ``[a, b]``; otherwise the report
    carries ``diagnostics["spectrum_violation"]``.
    """
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    iv = _as_interval(interval)
    degenerate = iv.a == iv.b
    if N < 1 and not degenerate:
        raise ValueError(f"N must be at least 1, got {N}")
    model = cheby_coeffs(p / 2.0, iv, 0 if degenerate else N)
    c = model.coeffs
    stream = ProbeStream(op.dim, seed, distribution)
    alpha = 2.0 / (iv.b - iv.a) if not degenerate else 0.0
    beta = (iv.b + iv.a) / (iv.b - iv.a) if not degenerate else 0.0
    growth = []

    def samples(start, count):
        W = stream.block(start, count)
        if degenerate:
            Z = c[0] * W
            return np.einsum("ij,ij->j", Z, Z)
        wnorm = np.linalg.norm(W, axis=0)
        wnorm[wnorm == 0] = 1.0
        y0 = W
        y1 = alpha * op.apply_block(W) - beta * W
        Z = c[0] * y0 + c[1] * y1
        worst = np.max(np.linalg.norm(y1, axis=0) / wnorm)
        for k in range(2, N + 1):
            y2 = 2.0 * alpha * op.apply_block(y1) - 2.0 * beta * y1 - y0
            Z += c[k] * y2
            worst = max(worst, np.max(np.linalg.norm(y2, axis=0) / wnorm))
            y0, y1 = y1, y2
        growth.append(float(worst))
        return np.einsum("ij,ij->j", Z, Z)

    before = op.matvecs
    t0 = time.perf_counter()
    mean, vals = run_samples(samples, M, op.dim, threads, keep_samples)
    value = _finish(mean, p)
    elapsed = time.perf_counter() - t0
    max_growth = max(growth) if growth else 1.0
    violation = max_growth > 1.0 + GROWTH_TOL
    if violation:
        msg = (f"Chebyshev recurrence grew by {max_growth:.6g} > 1: the spectrum is not "
               f"contained in [{iv.a:g}, {iv.b:g}]")
        if strict:
            raise SpectrumViolationError(msg)
        log.warning(msg)
    return EstimateReport(
        value=value, p_power_mean=mean, samples=vals, matvecs=op.matvecs - before,
        elapsed=elapsed, p=p, M=M, method="cheby", N=model.N, n=op.dim, seed=seed,
        distribution=distribution,
        diagnostics={"interval": [iv.a, iv.b], "max_recurrence_growth": max_growth,
                     "spectrum_violation": violation},
    )
