"""
Bargmann Core
Finite-section matrices of the ladder-operator compositions on the
truncated Bargmann space, orthonormal basis e_k = z^k / sqrt(k!), k = 1..N
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..errors import InvalidInputError, InvalidParameterError, InvalidTruncationError


@dataclass(frozen=True, eq=False)
class BandedComplexMatrix:
    """
    Complex matrix with bandwidth metadata.

    Entry (r, c), 1-based, is the coefficient of e_r in H e_c. Square for
    finite sections; rectangular (rows > cols) for exact-image forms that keep
    the rows a truncation would drop.
    """
    entries: sparse.csr_matrix
    lower_bw: int
    upper_bw: int

    def __post_init__(self):
        rows, cols = self.entries.shape
        if rows < cols:
            raise InvalidInputError(f"Matrix must have rows >= cols, got {rows}x{cols}")

    @classmethod
    def from_sparse(cls, matrix) -> "BandedComplexMatrix":
        """Wrap any scipy sparse matrix, measuring its bandwidths"""
        csr = sparse.csr_matrix(matrix, dtype=complex)
        csr.eliminate_zeros()
        coo = csr.tocoo()
        if coo.nnz:
            offsets = coo.row.astype(np.int64) - coo.col.astype(np.int64)
            lower = int(max(offsets.max(), 0))
            upper = int(max(-offsets.min(), 0))
        else:
            lower = upper = 0
        return cls(entries=csr, lower_bw=lower, upper_bw=upper)

    @classmethod
    def from_dense(cls, array) -> "BandedComplexMatrix":
        array = np.asarray(array, dtype=complex)
        if array.ndim != 2:
            raise InvalidInputError(f"Expected a 2-D array, got shape {array.shape}")
        return cls.from_sparse(sparse.csr_matrix(array))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    @property
    def is_diagonal(self) -> bool:
        return self.lower_bw == 0 and self.upper_bw == 0

    def entry(self, r: int, c: int) -> complex:
        """1-based entry access"""
        if not (1 <= r <= self.rows and 1 <= c <= self.cols):
            raise InvalidInputError(f"Entry ({r},{c}) outside a {self.rows}x{self.cols} matrix")
        return complex(self.entries[r - 1, c - 1])

    def to_dense(self) -> np.ndarray:
        return self.entries.toarray()

    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal()

    def scaled(self, factor: complex) -> "BandedComplexMatrix":
        return BandedComplexMatrix.from_sparse(self.entries * factor)

    def conj_transpose(self) -> "BandedComplexMatrix":
        return BandedComplexMatrix.from_sparse(self.entries.conj().T)

    def column_norms(self) -> np.ndarray:
        return np.sqrt(np.asarray(abs(self.entries).power(2).sum(axis=0)).ravel())

    def __add__(self, other: "BandedComplexMatrix") -> "BandedComplexMatrix":
        if self.shape != other.shape:
            raise InvalidInputError(f"Shape mismatch: {self.shape} vs {other.shape}")
        return BandedComplexMatrix.from_sparse(self.entries + other.entries)

    def __matmul__(self, vectors):
        return self.entries @ vectors


@dataclass(frozen=True)
class PomeronParams:
    """
    Couplings of the scalar Gribov operator
    lambda2*G + lambda1*S + mu*H0^beta + i*lambda_*H1.

    lambda2 (magic), lambda1 (four), lambda_ (triple), mu (intercept).
    lambda2 = 0 is accepted and gives the pure perturbation part.
    """
    lambda2: float
    lambda1: float = 0.0
    mu: float = 0.0
    lambda_: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        values = (self.lambda2, self.lambda1, self.mu, self.lambda_, self.beta)
        if not all(math.isfinite(v) for v in values):
            raise InvalidParameterError(f"Couplings must be finite: {values}")
        if not 0.0 < self.beta < 3.0:
            raise InvalidParameterError(f"beta must lie in (0,3), got {self.beta}")

    @property
    def pure_perturbation(self) -> bool:
        return self.lambda2 == 0.0


def check_truncation(N: int):
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidTruncationError(f"Truncation size must be a positive integer, got {N!r}")


def _diagonal(values: np.ndarray, rows: int | None = None) -> BandedComplexMatrix:
    """Diagonal operator, optionally padded with zero rows below"""
    n = len(values)
    shape = (rows or n, n)
    idx = np.arange(n)
    matrix = sparse.coo_matrix((np.asarray(values, dtype=complex), (idx, idx)), shape=shape)
    return BandedComplexMatrix.from_sparse(matrix)


def _levels(N: int) -> np.ndarray:
    return np.arange(1, N + 1, dtype=float)


def build_h0(N: int) -> BandedComplexMatrix:
    """Number operator A*A: diag(1, 2, ..., N)"""
    check_truncation(N)
    return _diagonal(_levels(N))


def build_h0_beta(N: int, beta: float, rows: int | None = None) -> BandedComplexMatrix:
    """
    Fractional power H0^beta: diag(k^beta).

    Args:
        N: Truncation size
        beta: Exponent in (0, 3]; 3 is admitted for the H0^3 comparisons
        rows: Pad to this many rows (exact-image companion of a rectangular operator)
    """
    check_truncation(N)
    if not (math.isfinite(beta) and 0.0 < beta <= 3.0):
        raise InvalidParameterError(f"beta must lie in (0,3], got {beta}")
    return _diagonal(_levels(N) ** beta, rows)


def build_s(N: int, rows: int | None = None) -> BandedComplexMatrix:
    """S = A*^2 A^2: diag(k(k-1))"""
    check_truncation(N)
    k = _levels(N)
    return _diagonal(k * (k - 1), rows)


def build_g(N: int, rows: int | None = None) -> BandedComplexMatrix:
    """G = A*^3 A^3: diag((k-2)(k-1)k)"""
    check_truncation(N)
    k = _levels(N)
    return _diagonal((k - 2) * (k - 1) * k, rows)


def build_h1(N: int, exact_image: bool = False) -> BandedComplexMatrix:
    """
    H1 = A*(A* + A)A, tridiagonal with zero diagonal.

    H1 e_k = k sqrt(k+1) e_{k+1} + (k-1) sqrt(k) e_{k-1}.

    Args:
        N: Truncation size
        exact_image: Keep the e_{N+1} row, giving an (N+1)xN matrix whose
                     column norms equal the untruncated ||H1 e_k||

    Returns:
        Square finite section, or the exact-image rectangular form
    """
    check_truncation(N)
    rows = N + 1 if exact_image else N
    k = _levels(N)

    # e_{k+1} row of column k
    sub_cols = np.arange(N) if exact_image else np.arange(N - 1)
    sub_vals = k[sub_cols] * np.sqrt(k[sub_cols] + 1)

    # e_{k-1} row of column k, k >= 2
    sup_cols = np.arange(1, N)
    sup_vals = (k[sup_cols] - 1) * np.sqrt(k[sup_cols])

    row_idx = np.concatenate([sub_cols + 1, sup_cols - 1])
    col_idx = np.concatenate([sub_cols, sup_cols])
    data = np.concatenate([sub_vals, sup_vals]).astype(complex)
    matrix = sparse.coo_matrix((data, (row_idx, col_idx)), shape=(rows, N))
    return BandedComplexMatrix.from_sparse(matrix)


def build_scalar_gribov(N: int, params: PomeronParams, exact_image: bool = False) -> BandedComplexMatrix:
    """
    lambda2*G + lambda1*S + mu*H0^beta + i*lambda_*H1, tridiagonal.

    With lambda2 = 0 this is the off-diagonal entry operator of a block matrix.
    """
    check_truncation(N)
    rows = N + 1 if exact_image else None
    total = (
        build_g(N, rows).entries * params.lambda2
        + build_s(N, rows).entries * params.lambda1
        + build_h0_beta(N, params.beta, rows).entries * params.mu
        + build_h1(N, exact_image).entries * (1j * params.lambda_)
    )
    return BandedComplexMatrix.from_sparse(total)
