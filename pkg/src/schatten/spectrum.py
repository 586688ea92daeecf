"""Matrix-free estimation of the spectral interval via Lanczos."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .chebyshev import SpectralInterval
from .linops import LinearOperator
from .probes import ProbeStream

MARGIN = 0.05


class NotSPDError(ValueError):
    """The operator could not be certified positive definite."""


@dataclass
class SpectrumEstimate:
    lambda_min_est: float
    lambda_max_est: float
    iterations: int
    ritz_values: np.ndarray
    residuals: np.ndarray = field(repr=False)


def lanczos(op: LinearOperator, m: int, seed: int = 0):
    """``m``-step Lanczos with full reorthogonalization.

    Returns ``(alpha, beta, beta_next)``: the tridiagonal coefficients and the
    norm of the last unnormalized residual.  Stops early on an invariant
    subspace, so ``len(alpha)`` may be less than ``m``.
    """
    if m < 1:
        raise ValueError("m must be positive")
    n = op.dim
    v = ProbeStream(n, seed, "gaussian").probe(0)
    V = np.zeros((n, m))
    V[:, 0] = v / np.linalg.norm(v)
    alpha, beta = [], []
    for j in range(m):
        w = op.apply(V[:, j])
        a = float(V[:, j] @ w)
        alpha.append(a)
        # two passes of classical Gram-Schmidt against the whole basis
        for _ in range(2):
            w -= V[:, : j + 1] @ (V[:, : j + 1].T @ w)
        b = float(np.linalg.norm(w))
        scale = max(abs(a), beta[-1] if beta else 0.0, 1e-300)
        if j == m - 1 or b <= 1e-12 * scale:
            break
        beta.append(b)
        V[:, j + 1] = w / b
    return np.array(alpha), np.array(beta), b


def ritz(op: LinearOperator, m: int, seed: int = 0) -> SpectrumEstimate:
    alpha, beta, tail = lanczos(op, m, seed)
    if len(alpha) == 1:
        theta, S = alpha.copy(), np.ones((1, 1))
    else:
        theta, S = eigh_tridiagonal(alpha, beta)
    # residual norm of each Ritz pair is |beta_m * last eigenvector component|
    res = np.abs(tail * S[-1, :])
    return SpectrumEstimate(float(theta[0]), float(theta[-1]), len(alpha), theta, res)


def interval_from_ritz(est: SpectrumEstimate, margin: float = MARGIN) -> SpectralInterval:
    """``[theta_min (1 - margin), theta_max (1 + margin)]``.

    The lower end falls back to ``theta_min / 2`` if the margin would make it
    non-positive.
    """
    lo, hi = est.lambda_min_est, est.lambda_max_est
    a = lo * (1.0 - margin)
    if a <= 0:
        a = lo * 0.5
    if a <= 0:
        raise NotSPDError(f"operator not certified SPD: smallest Ritz value is {lo:.3e}")
    return SpectralInterval(a, hi * (1.0 + margin))


def estimate_interval(op: LinearOperator, m: int = 30, seed: int = 0,
                      margin: float = MARGIN) -> SpectralInterval:
    """Safe spectral interval for the Chebyshev estimator from ``m`` Lanczos steps."""
    if op.dim == 1:
        m = 1
    elif m < 2 or m > op.dim:
        raise ValueError(f"need 2 <= m <= dim = {op.dim}, got m = {m}")
    return interval_from_ritz(ritz(op, m, seed), margin)
