"""Posterior covariance of a 1D heat-equation inverse problem.

The unknown is the initial temperature on ``nx`` interior nodes of (0, 1)
with homogeneous Dirichlet ends.  The forward map ``F`` runs implicit Euler
steps ``(I + dt k L) u^{m+1} = u^m`` and records linear interpolation of
``u`` at the sensors at each observation time (time-major ordering).

The posterior covariance ``(sigma^-2 F^T F + gamma K)^-1`` with ``K`` the
Dirichlet Laplacian is exposed as a :class:`~schatten.linops.LinearOperator`
whose action is a conjugate-gradient solve or, for speed, a data-space
Woodbury solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, cho_solve_banded, cholesky_banded

from .chebyshev import SpectralInterval, cheby_schatten_estimate
from .linops import DimensionError, LinearOperator
from .montecarlo import EstimateReport, McConfig, schatten_estimate
from .spectrum import estimate_interval


class ObservationAlignmentError(ValueError):
    """An observation time does not coincide with a time step."""


class CGConvergenceError(ArithmeticError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _laplacian_banded(n: int, h: float, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """Upper banded storage of ``shift * I + scale * (1/h^2) tridiag(-1, 2, -1)``."""
    ab = np.empty((2, n))
    ab[0, 0] = 0.0
    ab[0, 1:] = -scale / h**2
    ab[1, :] = shift + 2.0 * scale / h**2
    return ab


@dataclass
class HeatModel:
    nx: int = 254
    k: float = 2e-4
    t_f: float = 1.0
    nt: int = 100
    n_sensors: int = 17
    obs_times: tuple = (0.25, 0.5, 0.75, 1.0)
    sigma: float = 0.002
    gamma: float = 1e-4
    sensor_positions: np.ndarray | None = None
    _step_chol: np.ndarray = field(init=False, repr=False)
    _obs: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 2 or self.nt < 1:
            raise ValueError("need nx >= 2 interior nodes and nt >= 1 time steps")
        if self.k <= 0 or self.sigma <= 0 or self.gamma <= 0:
            raise ValueError("diffusion, sigma and gamma must be positive")
        if self.sensor_positions is None:
            self.sensor_positions = np.arange(1, self.n_sensors + 1) / (self.n_sensors + 1)
        self.sensor_positions = np.asarray(self.sensor_positions, dtype=float)
        self.n_sensors = len(self.sensor_positions)
        if np.any((self.sensor_positions <= 0) | (self.sensor_positions >= 1)):
            raise ValueError("sensor positions must lie strictly inside (0, 1)")

        steps = []
        for t in self.obs_times:
            s = t / self.dt
            if abs(s - round(s)) > 1e-12 * max(1.0, abs(s)) or not 0 <= round(s) <= self.nt:
                raise ObservationAlignmentError(
                    f"observation time {t} is not a multiple of dt = {self.dt} within [0, {self.t_f}]; "
                    f"choose nt so that every observation time lands on a time step"
                )
            steps.append(int(round(s)))
        if len(set(steps)) != len(steps):
            raise ObservationAlignmentError("observation times map to duplicate time steps")
        self.obs_steps = tuple(steps)
        self._step_chol = cholesky_banded(_laplacian_banded(self.nx, self.h, 1.0, self.dt * self.k))
        self._obs = self._interpolation_matrix()

    @property
    def h(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def dt(self) -> float:
        return self.t_f / self.nt

    @property
    def grid(self) -> np.ndarray:
        return np.arange(1, self.nx + 1) * self.h

    @property
    def n_obs(self) -> int:
        return self.n_sensors * len(self.obs_steps)

    def _interpolation_matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for r, s in enumerate(self.sensor_positions):
            node = int(np.floor(s / self.h))  # node index including the boundary at 0
            w = s / self.h - node
            for idx, weight in ((node, 1.0 - w), (node + 1, w)):
                if 1 <= idx <= self.nx and weight != 0.0:
                    rows.append(r)
                    cols.append(idx - 1)
                    vals.append(weight)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_sensors, self.nx))

    def step(self, u: np.ndarray) -> np.ndarray:
        """One implicit Euler step."""
        return cho_solve_banded((self._step_chol, False), u)

    def laplacian(self) -> sp.csr_matrix:
        main = np.full(self.nx, 2.0)
        off = np.full(self.nx - 1, -1.0)
        return sp.diags([off, main, off], [-1, 0, 1], format="csr") / self.h**2

    def states(self, phi) -> np.ndarray:
        """All states ``u^0 .. u^nt`` for one initial condition, as rows."""
        phi = self._check(phi, self.nx)
        out = [phi]
        for _ in range(self.nt):
            out.append(self.step(out[-1]))
        return np.array(out)

    @staticmethod
    def _check(x, n):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != n:
            raise DimensionError(f"expected leading dimension {n}, got shape {x.shape}")
        return x

    def apply_forward(self, phi) -> np.ndarray:
        """``F phi``: observations ordered time-major, then by sensor index."""
        u = self._check(phi, self.nx)
        seen = {}
        for m in range(self.nt + 1):
            if m > 0:
                u = self.step(u)
            if m in self.obs_steps:
                seen[m] = self._obs @ u
        return np.concatenate([seen[m] for m in self.obs_steps], axis=0)

    def apply_adjoint(self, d) -> np.ndarray:
        """``F^T d`` by marching the adjoint backwards in time."""
        d = self._check(d, self.n_obs)
        blocks = {m: d[i * self.n_sensors:(i + 1) * self.n_sensors]
                  for i, m in enumerate(self.obs_steps)}
        obs_t = self._obs.T.tocsr()
        v = np.zeros((self.nx,) + d.shape[1:])
        for m in range(self.nt, 0, -1):
            if m in blocks:
                v = v + obs_t @ blocks[m]
            v = self.step(v)
        if 0 in blocks:
            v = v + obs_t @ blocks[0]
        return v

    def forward_matrix(self) -> np.ndarray:
        """Dense ``F`` assembled from one block adjoint solve (``n_obs`` columns)."""
        return np.ascontiguousarray(self.apply_adjoint(np.eye(self.n_obs)).T)


class PosteriorCovOp(LinearOperator):
    """Matrix-free posterior covariance ``(sigma^-2 F^T F + gamma K)^-1``.

    ``solver="cg"`` applies it by conjugate gradients on the Hessian,
    preconditioned by the prior covariance ``(gamma K)^-1`` (banded Cholesky).
    In exact arithmetic that converges in ``n_obs + 1`` iterations; in floating
    point the large outlying eigenvalues stretch it to several hundred.

    ``solver="woodbury"`` works in the ``n_obs``-dimensional data space:
    ``P - P F^T (sigma^2 I + F P F^T)^-1 F P`` with ``P = (gamma K)^-1``.  The
    small capacitance matrix and ``P F^T`` are assembled once from ``n_obs``
    adjoint and forward applies; each apply then costs one prior solve, one
    ``F`` and a product with the stored ``P F^T``.

    ``forward="cached"`` materializes the ``n_obs x nx`` matrix ``F`` once;
    ``forward="march"`` runs the time stepping on every use.
    """

    def __init__(self, model: HeatModel, rtol: float = 1e-10, maxiter: int | None = None,
                 forward: str = "cached", solver: str = "cg"):
        super().__init__(model.nx, spd=True)
        self.model = model
        self.rtol = rtol
        self.maxiter = 10 * model.nx if maxiter is None else maxiter
        self.K = model.laplacian()
        self._prior_chol = cholesky_banded(_laplacian_banded(model.nx, model.h, 0.0, model.gamma))
        if forward == "cached":
            F = model.forward_matrix()
            self._F = lambda X: F @ X
            self._Ft = lambda Y: F.T @ Y
        elif forward == "march":
            self._F = model.apply_forward
            self._Ft = model.apply_adjoint
        else:
            raise ValueError(f"forward must be 'cached' or 'march', got {forward!r}")
        if solver not in ("cg", "woodbury"):
            raise ValueError(f"solver must be 'cg' or 'woodbury', got {solver!r}")
        self.solver = solver
        if solver == "woodbury":
            self._PFt = self.prior_cov(self._Ft(np.eye(model.n_obs)))
            cap = model.sigma**2 * np.eye(model.n_obs) + self._F(self._PFt)
            self._cap = cho_factor(0.5 * (cap + cap.T))
        self.cg_iterations = 0

    def hessian(self, X: np.ndarray) -> np.ndarray:
        m = self.model
        return self._Ft(self._F(X)) / m.sigma**2 + m.gamma * (self.K @ X)

    def prior_cov(self, X: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self._prior_chol, False), X)

    def _matmat(self, B):
        if self.solver == "woodbury":
            U = self.prior_cov(B)
            return U - self._PFt @ cho_solve(self._cap, self._F(U))
        return self._cg(B)

    def _cg(self, B):
        Y = np.zeros_like(B)
        R = B.copy()
        bnorm = np.linalg.norm(B, axis=0)
        act = np.flatnonzero(bnorm > 0)
        Z = self.prior_cov(R[:, act])
        P = Z.copy()
        rz = np.einsum("ij,ij->j", R[:, act], Z)
        it = 0
        while act.size:
            if it >= self.maxiter:
                rel = np.linalg.norm(R[:, act], axis=0) / bnorm[act]
                raise CGConvergenceError(
                    f"CG did not converge in {self.maxiter} iterations "
                    f"(worst relative residual {rel.max():.3e})", float(rel.max()), it)
            it += 1
            HP = self.hessian(P)
            alpha = rz / np.einsum("ij,ij->j", P, HP)
            Y[:, act] += alpha * P
            R[:, act] -= alpha * HP
            rel = np.linalg.norm(R[:, act], axis=0) / bnorm[act]
            keep = rel > self.rtol
            act, P, rz = act[keep], P[:, keep], rz[keep]
            if not act.size:
                break
            Z = self.prior_cov(R[:, act])
            rz_new = np.einsum("ij,ij->j", R[:, act], Z)
            P = Z + (rz_new / rz) * P
            rz = rz_new
        self.cg_iterations += it
        return Y


def dense_posterior_cov(model: HeatModel) -> np.ndarray:
    """Explicit inverse of the dense Hessian (oracle for small models)."""
    F = model.forward_matrix()
    H = F.T @ F / model.sigma**2 + model.gamma * model.laplacian().toarray()
    G = np.linalg.inv(H)
    return 0.5 * (G + G.T)


def posterior_schatten(model: HeatModel, p: float, method: str = "mc", M: int = 1000,
                       N: int | None = None, interval=None, seed: int = 0,
                       distribution: str = "gaussian", threads: int | None = None,
                       lanczos_steps: int = 40, solver: str = "woodbury",
                       op: PosteriorCovOp | None = None) -> EstimateReport:
    """Estimate ``||Gamma_post||_p`` with the exact-power or Chebyshev estimator."""
    op = PosteriorCovOp(model, solver=solver) if op is None else op
    if method == "mc":
        return schatten_estimate(op, McConfig(p, M, seed, distribution, threads))
    if method == "cheby":
        if N is None:
            raise ValueError("the Chebyshev estimator needs a degree N")
        t0 = time.perf_counter()
        if interval is None:
            interval = estimate_interval(op, min(lanczos_steps, op.dim), seed)
        elif not isinstance(interval, SpectralInterval):
            interval = SpectralInterval(*interval)
        rep = cheby_schatten_estimate(op, interval, p, N, M, seed, distribution, threads)
        rep.diagnostics["setup_s"] = time.perf_counter() - t0 - rep.elapsed
        return rep
    raise ValueError(f"unknown method {method!r}; expected 'mc' or 'cheby'")
