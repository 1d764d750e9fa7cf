"""
Eigensolver
Dense eigenvalues of complex non-Hermitian matrices by implicitly shifted QR
on the Hessenberg form, with a Hermitian tridiagonal path, inverse iteration
for eigenvectors and finite-section stabilization
"""

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.linalg as la
from scipy.linalg import blas

from ..errors import DefectiveClusterWarning, InvalidInputError, IterationLimitError
from ..operators.bargmann_core import BandedComplexMatrix

HERMITIAN_TOL = 1e-13
CLUSTER_TOL = 1e-8
SWEEP_FACTOR = 30
EXCEPTIONAL_SHIFT_EVERY = 10
EIGVEC_RESIDUAL_TOL = 1e-8
INVERSE_ITERATION_STEPS = 8
PARALLEL_TOL = 1e-6

EPS = np.finfo(float).eps

MatrixLike = BandedComplexMatrix | np.ndarray


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """
    Eigenvalues with algebraic multiplicity, sorted by (modulus, phase).

    backward_error is the largest subdiagonal neglected by deflation relative
    to the matrix norm. residual_bound is the largest eigenpair residual
    max ||M v - lambda v|| / ||M||; it is exact (0) for diagonal input and
    otherwise None until eigenvectors are attached with with_residual().
    stabilized flags come from comparing against a larger truncation; a
    spectrum computed from a single matrix trusts every eigenvalue
    (stability_checked is False).
    """
    eigenvalues: np.ndarray
    backward_error: float
    stabilized: np.ndarray
    iterations: int
    hermitian: bool = False
    stability_checked: bool = False
    truncation: int | None = None
    reference_truncation: int | None = None
    residual_bound: float | None = None

    @property
    def dimension(self) -> int:
        return len(self.eigenvalues)

    def stable_indices(self) -> np.ndarray:
        return np.flatnonzero(self.stabilized)

    def stable_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.stabilized]


def as_dense(M: MatrixLike) -> np.ndarray:
    """Dense complex square copy of a matrix argument"""
    if isinstance(M, BandedComplexMatrix) and not M.is_square:
        raise InvalidInputError(f"Expected a square section, got shape {M.shape}")
    A = M.to_dense() if isinstance(M, BandedComplexMatrix) else np.array(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"Expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("Matrix has non-finite entries")
    return A


def sort_order(values: np.ndarray) -> np.ndarray:
    """Permutation sorting by modulus, then phase in [0, 2pi)"""
    if len(values) == 0:
        return np.arange(0)
    modulus = np.abs(values)
    scale = max(1.0, float(modulus.max()))
    phase = np.mod(np.angle(values), 2 * np.pi)
    return np.lexsort((np.round(phase, 12), np.round(modulus / scale, 12)))


def is_hermitian(A: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return np.linalg.norm(A - A.conj().T) <= tol * np.linalg.norm(A)


def _is_diagonal(A: np.ndarray) -> bool:
    return not np.any(A - np.diag(np.diag(A)))


def hessenberg(M: MatrixLike) -> tuple[np.ndarray, np.ndarray]:
    """
    Unitary reduction to upper Hessenberg form.

    Returns:
        (H, Q) with Q* M Q = H; inputs that are already Hessenberg are
        returned unchanged with Q = I
    """
    A = as_dense(M)
    n = A.shape[0]
    if not np.any(np.tril(A, -2)):
        return A.copy(), np.eye(n, dtype=complex)
    H, Q = la.hessenberg(A, calc_q=True)
    H = np.triu(H, -1)
    return H.astype(complex), Q.astype(complex)


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    """Eigenvalue of [[a, b], [c, d]] closest to d"""
    half_trace = (a + d) / 2
    disc = cmath.sqrt(((a - d) / 2) ** 2 + b * c)
    mu1, mu2 = half_trace + disc, half_trace - disc
    return mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2


def _francis_step(H: np.ndarray, lo: int, hi: int, shift: complex):
    """One implicit single-shift QR sweep on the active window H[lo:hi+1, lo:hi+1]"""
    G = np.empty((2, 2), dtype=complex)
    GH = np.empty((2, 2), dtype=complex)
    x = H[lo, lo] - shift
    y = H[lo + 1, lo]
    for k in range(lo, hi):
        c, s = blas.zrotg(x, y)
        c = c.real
        G[0, 0] = G[1, 1] = GH[0, 0] = GH[1, 1] = c
        G[0, 1] = s
        G[1, 0] = -s.conjugate()
        GH[0, 1] = -s
        GH[1, 0] = s.conjugate()

        rows = H[k:k + 2, max(lo, k - 1):hi + 1]
        rows[...] = G @ rows
        if k > lo:
            H[k + 1, k - 1] = 0.0

        cols = H[lo:min(k + 2, hi) + 1, k:k + 2]
        cols[...] = cols @ GH

        if k < hi - 1:
            x = H[k + 1, k]
            y = H[k + 2, k]


def _deflation_point(H: np.ndarray, hi: int, norm: float) -> int:
    """Largest lo <= hi whose subdiagonal H[lo, lo-1] is negligible, 0 if none"""
    diag = np.abs(np.diagonal(H)[:hi + 1])
    sub = np.abs(np.diagonal(H, -1)[:hi])
    scale = diag[1:] + diag[:-1]
    scale[scale == 0.0] = norm
    small = np.flatnonzero(sub <= EPS * scale)
    return int(small[-1]) + 1 if len(small) else 0


def _shifted_qr(H: np.ndarray) -> tuple[np.ndarray, int, float]:
    """
    Eigenvalues of an upper Hessenberg matrix.

    Returns:
        (eigenvalues in deflation position order, iterations, largest
        neglected subdiagonal relative to ||H||)
    """
    H = H.copy()
    n = H.shape[0]
    norm = np.linalg.norm(H) or 1.0
    budget = SWEEP_FACTOR * n

    eigs = np.zeros(n, dtype=complex)
    found = np.zeros(n, dtype=bool)
    iterations = 0
    since_deflation = 0
    neglected = 0.0
    hi = n - 1

    while hi >= 0:
        lo = _deflation_point(H, hi, norm)
        if lo > 0:
            neglected = max(neglected, abs(H[lo, lo - 1]))
            H[lo, lo - 1] = 0.0

        if lo == hi:
            eigs[hi] = H[hi, hi]
            found[hi] = True
            hi -= 1
            since_deflation = 0
            continue

        if iterations >= budget:
            raise IterationLimitError(
                f"Shifted QR did not converge within {budget} sweeps "
                f"({int(found.sum())} of {n} eigenvalues deflated)",
                partial_eigenvalues=eigs[found].copy(),
                iterations=iterations,
            )
        iterations += 1
        since_deflation += 1

        if since_deflation % EXCEPTIONAL_SHIFT_EVERY == 0:
            shift = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            shift = _wilkinson_shift(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        _francis_step(H, lo, hi, shift)

    return eigs, iterations, neglected / norm


def _hermitian_eigenvalues(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Real eigenvalues through the symmetric tridiagonal form"""
    H, _ = hessenberg(A)
    d = H.diagonal().real.copy()
    if len(d) == 1:
        return d, 0.0
    e = (np.abs(np.diagonal(H, -1)) + np.abs(np.diagonal(H, 1))) / 2
    values = la.eigh_tridiagonal(d, e, eigvals_only=True)
    dropped = np.linalg.norm(np.triu(H, 2)) + np.linalg.norm(np.abs(np.diagonal(H, -1)) - e)
    return values, dropped / (np.linalg.norm(A) or 1.0)


def eigenvalues(M: MatrixLike) -> SpectrumResult:
    """
    All eigenvalues of a square matrix.

    Diagonal inputs are read off exactly. Hermitian inputs (up to
    HERMITIAN_TOL relative) take the real tridiagonal path and return
    eigenvalues with zero imaginary part. Everything else goes through
    shifted QR on the Hessenberg form.

    Raises:
        IterationLimitError: QR budget of SWEEP_FACTOR * dim sweeps exhausted
    """
    A = as_dense(M)
    n = A.shape[0]
    diagonal = _is_diagonal(A)

    if diagonal:
        values = np.diag(A).copy()
        hermitian = not np.any(values.imag)
        iterations, backward = 0, 0.0
    elif is_hermitian(A):
        real_values, backward = _hermitian_eigenvalues(A)
        values = real_values.astype(complex)
        hermitian = True
        iterations = 0
    else:
        H, _ = hessenberg(A)
        values, iterations, backward = _shifted_qr(H)
        hermitian = False

    order = sort_order(values)
    return SpectrumResult(
        eigenvalues=values[order],
        backward_error=float(backward),
        stabilized=np.ones(n, dtype=bool),
        iterations=iterations,
        hermitian=hermitian,
        residual_bound=0.0 if diagonal else None,
    )


def near_groups(values: np.ndarray, tol: float = CLUSTER_TOL) -> list[list[int]]:
    """Index groups of eigenvalues within tol*(1+|lambda|) of a group member"""
    groups: list[list[int]] = []
    assigned = np.full(len(values), -1)
    for j, lam in enumerate(values):
        if assigned[j] >= 0:
            continue
        group = [j]
        assigned[j] = len(groups)
        frontier = [j]
        while frontier:
            idx = frontier.pop()
            close = np.flatnonzero(
                (assigned < 0) & (np.abs(values - values[idx]) <= tol * (1 + abs(values[idx])))
            )
            assigned[close] = len(groups)
            group.extend(close.tolist())
            frontier.extend(close.tolist())
        groups.append(sorted(group))
    return groups


def _inverse_iteration(A: np.ndarray, values: np.ndarray, hermitian: bool) -> tuple[np.ndarray, np.ndarray]:
    """
    Unit eigenvectors by shifted inverse iteration.

    Returns:
        (V, defective) where defective flags columns whose iteration stagnated
        or collapsed onto a cluster mate
    """
    n = A.shape[0]
    norm = np.linalg.norm(A) or 1.0
    identity = np.eye(n)
    rng = np.random.default_rng(0)

    V = np.zeros((n, len(values)), dtype=complex)
    defective = np.zeros(len(values), dtype=bool)

    if _is_diagonal(A):
        diag = np.diag(A)
        free = np.ones(n, dtype=bool)
        for j, lam in enumerate(values):
            candidates = np.flatnonzero(free)
            pick = candidates[np.argmin(np.abs(diag[candidates] - lam))]
            free[pick] = False
            V[pick, j] = 1.0
        return V, defective

    for group in near_groups(values):
        mates: list[np.ndarray] = []
        for rank, j in enumerate(group):
            lam = values[j]
            delta = (rank + 1) * 64 * EPS * norm
            lu = la.lu_factor(A - (lam + delta) * identity, check_finite=False)

            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            for v in mates:
                x -= (v.conj() @ x) * v
            x /= np.linalg.norm(x)

            residual = np.inf
            for _ in range(INVERSE_ITERATION_STEPS):
                y = la.lu_solve(lu, x, check_finite=False)
                size = np.linalg.norm(y)
                if not np.isfinite(size) or size == 0.0:
                    break
                x = y / size
                residual = np.linalg.norm(A @ x - lam * x)
                if residual <= 1e-12 * norm:
                    break

            if residual > EIGVEC_RESIDUAL_TOL * norm:
                defective[j] = True
            if not hermitian and any(abs(v.conj() @ x) > 1 - PARALLEL_TOL for v in mates):
                defective[j] = True
            V[:, j] = x
            mates.append(x)

        if hermitian and len(group) > 1:
            Q, _ = np.linalg.qr(V[:, group])
            V[:, group] = Q

    return V, defective


def eigenvectors(M: MatrixLike, spectrum: SpectrumResult) -> np.ndarray:
    """
    Unit eigenvectors, column j for spectrum.eigenvalues[j].

    Warns DefectiveClusterWarning when inverse iteration stagnates.
    """
    V, defective = eigenvector_pairs(M, spectrum)
    return V


def eigenvector_pairs(M: MatrixLike, spectrum: SpectrumResult) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors together with the per-column defective flags"""
    A = as_dense(M)
    if A.shape[0] != spectrum.dimension:
        raise InvalidInputError(f"Spectrum of size {spectrum.dimension} does not belong to a {A.shape[0]}x{A.shape[0]} matrix")
    V, defective = _inverse_iteration(A, spectrum.eigenvalues, spectrum.hermitian)
    if defective.any():
        warnings.warn(
            f"Inverse iteration stagnated for {int(defective.sum())} eigenvalue(s); "
            f"eigenvector basis is numerically defective",
            DefectiveClusterWarning,
            stacklevel=2,
        )
    return V, defective


def pair_residual(M: MatrixLike, spectrum: SpectrumResult, V: np.ndarray) -> float:
    """max_j ||M v_j - lambda_j v_j|| / ||M||"""
    A = as_dense(M)
    norm = np.linalg.norm(A) or 1.0
    residuals = np.linalg.norm(A @ V - V * spectrum.eigenvalues[None, :], axis=0)
    return float(residuals.max() / norm) if len(residuals) else 0.0


def with_residual(M: MatrixLike, spectrum: SpectrumResult, V: np.ndarray | None = None) -> SpectrumResult:
    """Copy of spectrum with residual_bound filled from its eigenpairs"""
    if V is None:
        V, _ = eigenvector_pairs(M, spectrum)
    return replace(spectrum, residual_bound=pair_residual(M, spectrum, V))


def counting(spectrum: SpectrumResult, r: float) -> int:
    """Number of eigenvalues with modulus <= r, with multiplicity"""
    if not r >= 0:
        raise InvalidInputError(f"Radius must be >= 0, got {r}")
    return int(np.count_nonzero(np.abs(spectrum.eigenvalues) <= r))


def stabilized_spectrum(
    build: Callable[[int], MatrixLike],
    N: int,
    growth: float = 2.0,
    rel_tol: float = 1e-6,
    max_workers: int | None = 2,
) -> SpectrumResult:
    """
    Spectrum at truncation N with finite-section stability flags.

    An eigenvalue of the N-truncation is stabilized when the
    ceil(growth*N)-truncation has an eigenvalue within rel_tol*(1+|lambda|).

    Args:
        build: Matrix builder for any truncation size
        N: Base truncation
        growth: Reference truncation factor, > 1
        rel_tol: Relative matching tolerance
        max_workers: Threads for the two independent solves
    """
    if not growth > 1:
        raise InvalidInputError(f"growth must exceed 1, got {growth}")
    if not rel_tol > 0:
        raise InvalidInputError(f"rel_tol must be positive, got {rel_tol}")
    larger = math.ceil(growth * N)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=min(max_workers, 2)) as pool:
            small_job = pool.submit(lambda: eigenvalues(build(N)))
            large_job = pool.submit(lambda: eigenvalues(build(larger)))
            small, large = small_job.result(), large_job.result()
    else:
        small, large = eigenvalues(build(N)), eigenvalues(build(larger))

    return mark_stabilized(small, large, rel_tol, N, larger)


def mark_stabilized(
    small: SpectrumResult,
    reference: SpectrumResult,
    rel_tol: float,
    truncation: int | None = None,
    reference_truncation: int | None = None,
) -> SpectrumResult:
    """Flag eigenvalues of small matched by reference within rel_tol*(1+|lambda|)"""
    values = small.eigenvalues
    ref = reference.eigenvalues
    if len(values) and len(ref):
        distance = np.abs(values[:, None] - ref[None, :]).min(axis=1)
    else:
        distance = np.full(len(values), np.inf)
    flags = distance <= rel_tol * (1 + np.abs(values))

    return replace(
        small,
        stabilized=flags,
        stability_checked=True,
        truncation=truncation,
        reference_truncation=reference_truncation,
    )
