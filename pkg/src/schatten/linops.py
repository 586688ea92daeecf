"""Matrix-free symmetric linear operators.

Every estimator in this package touches a matrix only through
:meth:`LinearOperator.apply` (one vector) or :meth:`LinearOperator.apply_block`
(a stack of column vectors).  Both routes feed the same matvec tally, so a
block of ``k`` columns counts as ``k`` matrix-vector products.
"""

from __future__ import annotations

import threading
from typing import Callable

import numpy as np
import scipy.sparse as sp

SYMMETRY_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when a vector length does not match the operator dimension."""


class SymmetryError(ValueError):
    """Raised when a matrix handed to a symmetric backend is not symmetric."""


class LinearOperator:
    """Base class for an n x n symmetric operator.

    Subclasses implement ``_matmat`` acting on an ``(n, k)`` array.  The
    ``spd`` flag is advertised by the caller and is never verified here.
    """

    def __init__(self, dim: int, spd: bool = False):
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        self.spd = spd
        self._matvecs = 0
        self._lock = threading.Lock()

    @property
    def matvecs(self) -> int:
        return self._matvecs

    def _tally(self, k: int) -> None:
        with self._lock:
            self._matvecs += k

    def reset_counter(self) -> None:
        with self._lock:
            self._matvecs = 0

    def _matmat(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected vector of length {self.dim}, got shape {x.shape}")
        y = self._matmat(x[:, None])[:, 0]
        self._tally(1)
        return y

    def apply_block(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] != self.dim:
            raise DimensionError(f"expected array of shape ({self.dim}, k), got {X.shape}")
        Y = self._matmat(X)
        self._tally(X.shape[1])
        return Y

    def view(self) -> "LinearOperator":
        """Same action with a private matvec counter, for one concurrent worker."""
        return _CountingView(self)

    def __matmul__(self, x):
        x = np.asarray(x)
        return self.apply(x) if x.ndim == 1 else self.apply_block(x)

    def to_dense(self) -> np.ndarray:
        """Materialize by applying to the identity (costs ``dim`` matvecs)."""
        return self.apply_block(np.eye(self.dim))

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, spd={self.spd})"


class _CountingView(LinearOperator):
    def __init__(self, base: LinearOperator):
        super().__init__(base.dim, base.spd)
        self.base = base

    def _matmat(self, X):
        return self.base._matmat(X)


def _check_symmetric(A: np.ndarray, rtol: float) -> None:
    scale = np.max(np.abs(A)) if A.size else 0.0
    defect = np.max(np.abs(A - A.T)) if A.size else 0.0
    if defect > rtol * scale:
        raise SymmetryError(
            f"matrix is not symmetric: max|a_ij - a_ji| = {defect:.3e} > {rtol:g} * {scale:.3e}"
        )


class DenseSym(LinearOperator):
    """Dense symmetric matrix.  Asymmetric input is rejected, never symmetrized."""

    def __init__(self, matrix, spd: bool = False, rtol: float = SYMMETRY_RTOL):
        A = np.array(matrix, dtype=float, order="C")
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        _check_symmetric(A, rtol)
        super().__init__(A.shape[0], spd)
        self.matrix = A

    def _matmat(self, X):
        return self.matrix @ X


class SparseSym(LinearOperator):
    """Symmetric matrix in compressed sparse row storage.

    Column indices are sorted within each row and duplicates summed.  Symmetry
    is checked by comparing the matrix with its transpose (pattern and values).
    """

    def __init__(self, indptr, indices, data, dim: int | None = None,
                 spd: bool = False, rtol: float = SYMMETRY_RTOL):
        indptr = np.asarray(indptr, dtype=np.int64)
        n = len(indptr) - 1 if dim is None else dim
        csr = sp.csr_matrix((np.asarray(data, dtype=float), np.asarray(indices), indptr),
                            shape=(n, n))
        self._init_from_csr(csr, spd, rtol)

    @classmethod
    def from_scipy(cls, matrix, spd: bool = False, rtol: float = SYMMETRY_RTOL) -> "SparseSym":
        self = cls.__new__(cls)
        self._init_from_csr(sp.csr_matrix(matrix, dtype=float), spd, rtol)
        return self

    def _init_from_csr(self, csr, spd, rtol):
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {csr.shape}")
        csr = csr.copy()
        csr.sum_duplicates()
        csr.sort_indices()
        scale = np.max(np.abs(csr.data)) if csr.nnz else 0.0
        diff = (csr - csr.T).tocsr()
        defect = np.max(np.abs(diff.data)) if diff.nnz else 0.0
        if defect > rtol * scale:
            raise SymmetryError(
                f"sparse matrix is not symmetric: max|a_ij - a_ji| = {defect:.3e}"
            )
        LinearOperator.__init__(self, csr.shape[0], spd)
        self.csr = csr

    @property
    def indptr(self):
        return self.csr.indptr

    @property
    def indices(self):
        return self.csr.indices

    @property
    def data(self):
        return self.csr.data

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def _matmat(self, X):
        return np.asarray(self.csr @ X)

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()


class DiagonalSimilarity(LinearOperator):
    """``Q diag(d) Q^T`` applied without forming the product.

    ``Q`` is assumed orthogonal; only its action is used.
    """

    def __init__(self, Q, d, spd: bool | None = None):
        Q = np.asarray(Q, dtype=float)
        d = np.asarray(d, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or d.shape != (Q.shape[0],):
            raise ValueError("Q must be n x n and d of length n")
        if spd is None:
            spd = bool(np.all(d > 0))
        super().__init__(Q.shape[0], spd)
        self.Q = Q
        self.d = d

    def _matmat(self, X):
        return self.Q @ (self.d[:, None] * (self.Q.T @ X))


class FunctionOperator(LinearOperator):
    """Operator given by a callable acting on ``(n, k)`` blocks."""

    def __init__(self, dim: int, matmat: Callable[[np.ndarray], np.ndarray], spd: bool = False):
        super().__init__(dim, spd)
        self._fn = matmat

    def _matmat(self, X):
        return np.asarray(self._fn(X), dtype=float)


class ScaledOperator(LinearOperator):
    """``alpha * A`` sharing ``A``'s action; counts on both operators."""

    def __init__(self, op: LinearOperator, alpha: float):
        super().__init__(op.dim, op.spd and alpha > 0)
        self.op = op
        self.alpha = float(alpha)

    def _matmat(self, X):
        return self.alpha * self.op.apply_block(X)


class SumOperator(LinearOperator):
    """Sum of symmetric operators of equal dimension."""

    def __init__(self, *ops: LinearOperator):
        if not ops:
            raise ValueError("need at least one operator")
        dims = {op.dim for op in ops}
        if len(dims) != 1:
            raise DimensionError(f"operators have differing dimensions {sorted(dims)}")
        super().__init__(ops[0].dim, all(op.spd for op in ops))
        self.ops = ops

    def _matmat(self, X):
        out = self.ops[0].apply_block(X)
        for op in self.ops[1:]:
            out = out + op.apply_block(X)
        return out


def identity(n: int) -> DenseSym:
    return DenseSym(np.eye(n), spd=True)


def diagonal(values) -> DenseSym:
    values = np.asarray(values, dtype=float)
    return DenseSym(np.diag(values), spd=bool(np.all(values > 0)))


def apply(op: LinearOperator, x) -> np.ndarray:
    return op.apply(x)


def apply_power(op: LinearOperator, x, K: int) -> np.ndarray:
    """Return ``A^K x`` by ``K`` successive applies."""
    if K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    y = np.asarray(x, dtype=float)
    for _ in range(K):
        y = op.apply(y) if y.ndim == 1 else op.apply_block(y)
    return y


def quadratic_form(op: LinearOperator, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ op.apply(x))
