"""Test matrices: synthetic spectra, Trefethen matrices and Matrix Market I/O."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linops import DenseSym, SparseSym

FAMILIES = ("linear", "clustered", "quadratic", "exponential")


@dataclass(frozen=True)
class SyntheticSpec:
    family: str
    n: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.family == "clustered" and self.n < 5:
            raise ValueError("clustered family needs n >= 5 so both clusters are nonempty")


def synthetic_eigenvalues(family: str, n: int) -> np.ndarray:
    """Eigenvalues of a synthetic family, generalized from the n = 100 case.

    linear: 6, 7, ..., n + 5.  clustered: first 20% of n at 100, the rest at 1.
    quadratic: k^-2.  exponential: 0.9^k.  (k = 1..n)
    """
    k = np.arange(1, n + 1, dtype=float)
    if family == "linear":
        return k + 5.0
    if family == "clustered":
        top = n // 5
        return np.where(k <= top, 100.0, 1.0)
    if family == "quadratic":
        return k**-2.0
    if family == "exponential":
        return 0.9**k
    raise ValueError(f"unknown family {family!r}")


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    """Q factor of a seeded Gaussian matrix, with R's diagonal made positive."""
    G = np.random.default_rng(seed).standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def gen_synthetic(spec: SyntheticSpec) -> tuple[DenseSym, np.ndarray]:
    """``A = Q D Q^T`` for a synthetic family; returns the operator and diag(D)."""
    d = synthetic_eigenvalues(spec.family, spec.n)
    Q = random_orthogonal(spec.n, spec.seed)
    A = (Q * d) @ Q.T
    A = 0.5 * (A + A.T)
    return DenseSym(A, spd=True), d


def spd_with_spectrum(eigenvalues, seed: int = 0) -> DenseSym:
    d = np.asarray(eigenvalues, dtype=float)
    Q = random_orthogonal(len(d), seed)
    A = (Q * d) @ Q.T
    return DenseSym(0.5 * (A + A.T), spd=bool(np.all(d > 0)))


def _primes(count: int) -> np.ndarray:
    limit = max(16, int(count * (np.log(count + 1) + np.log(np.log(count + 2)) + 3)))
    while True:
        sieve = np.ones(limit + 1, dtype=bool)
        sieve[:2] = False
        for i in range(2, int(limit**0.5) + 1):
            if sieve[i]:
                sieve[i * i :: i] = False
        primes = np.flatnonzero(sieve)
        if len(primes) >= count:
            return primes[:count].astype(float)
        limit *= 2


def trefethen(n: int) -> SparseSym:
    """Trefethen matrix: primes on the diagonal, ones where ``|i - j|`` is a power of two."""
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [_primes(n)]
    d = 1
    while d < n:
        i = np.arange(n - d)
        rows += [i, i + d]
        cols += [i + d, i]
        vals += [np.ones(n - d), np.ones(n - d)]
        d *= 2
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return SparseSym.from_scipy(A, spd=True)


# -- Matrix Market -----------------------------------------------------------

class MatrixMarketError(ValueError):
    """Base class for Matrix Market parse failures."""


class HeaderError(MatrixMarketError):
    """Missing or malformed banner or size line."""


class FieldTypeError(MatrixMarketError):
    """Field is not real/integer (pattern or complex data)."""


class IndexRangeError(MatrixMarketError):
    """An entry index lies outside the declared dimensions."""


class AsymmetryError(MatrixMarketError):
    """A general-format matrix is not symmetric within tolerance."""


def load_matrix_market(path, rtol: float = 1e-10, spd: bool = True) -> SparseSym:
    """Read a real symmetric coordinate Matrix Market file.

    ``symmetric`` files store one triangle; ``general`` files are accepted if
    their content is symmetric to ``rtol`` relative to the largest entry.
    """
    with open(path, "r") as fh:
        banner = fh.readline()
        parts = banner.strip().split()
        if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
            raise HeaderError(f"{path}: missing %%MatrixMarket banner")
        obj, fmt, fieldtype, symmetry = (s.lower() for s in parts[1:])
        if obj != "matrix":
            raise HeaderError(f"{path}: object {obj!r} is not 'matrix'")
        if fmt != "coordinate":
            raise HeaderError(f"{path}: only coordinate format is supported, got {fmt!r}")
        if fieldtype not in ("real", "integer", "double"):
            raise FieldTypeError(f"{path}: field {fieldtype!r} is not supported (need real)")
        if symmetry not in ("symmetric", "general"):
            raise HeaderError(f"{path}: symmetry {symmetry!r} is not supported")

        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        try:
            nrows, ncols, nnz = (int(t) for t in line.split())
        except ValueError:
            raise HeaderError(f"{path}: malformed size line {line!r}") from None
        if nrows != ncols:
            raise HeaderError(f"{path}: matrix is {nrows} x {ncols}, not square")

        try:
            body = np.loadtxt(fh, comments="%", ndmin=2)
        except ValueError as exc:
            raise HeaderError(f"{path}: malformed entry line ({exc})") from None
    if nnz == 0:
        body = np.zeros((0, 3))
    if body.shape != (nnz, 3):
        raise HeaderError(f"{path}: expected {nnz} entries with 3 columns, got {body.shape}")

    i = body[:, 0].astype(np.int64) - 1
    j = body[:, 1].astype(np.int64) - 1
    v = body[:, 2]
    if np.any((i < 0) | (i >= nrows) | (j < 0) | (j >= ncols)):
        raise IndexRangeError(f"{path}: entry index outside 1..{nrows}")

    if symmetry == "symmetric":
        off = i != j
        i, j, v = np.concatenate([i, j[off]]), np.concatenate([j, i[off]]), np.concatenate([v, v[off]])
    A = sp.coo_matrix((v, (i, j)), shape=(nrows, ncols)).tocsr()
    if symmetry == "general":
        scale = np.max(np.abs(A.data)) if A.nnz else 0.0
        diff = (A - A.T).tocsr()
        defect = np.max(np.abs(diff.data)) if diff.nnz else 0.0
        if defect > rtol * scale:
            raise AsymmetryError(f"{path}: general matrix is not symmetric (defect {defect:.3e})")
        A = 0.5 * (A + A.T)
    return SparseSym.from_scipy(A, spd=spd, rtol=rtol)


def write_matrix_market(path, A, comment: str | None = None) -> None:
    """Write a symmetric matrix (lower triangle) in coordinate real symmetric format."""
    if isinstance(A, SparseSym):
        M = A.csr
    elif isinstance(A, DenseSym):
        M = sp.csr_matrix(A.matrix)
    else:
        M = sp.csr_matrix(np.asarray(A, dtype=float))
    lower = sp.tril(M).tocoo()
    order = np.lexsort((lower.row, lower.col))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{M.shape[0]} {M.shape[1]} {lower.nnz}\n")
        for k in order:
            fh.write(f"{lower.row[k] + 1} {lower.col[k] + 1} {float(lower.data[k])!r}\n")


def find_suitesparse(name: str) -> str | None:
    """Locate ``<name>.mtx`` under $SCHATTEN_DATA or ./data, if present."""
    for root in (os.environ.get("SCHATTEN_DATA"), "data", os.path.join("tests", "data")):
        if not root:
            continue
        for candidate in (os.path.join(root, f"{name}.mtx"), os.path.join(root, name, f"{name}.mtx")):
            if os.path.exists(candidate):
                return candidate
    return None
