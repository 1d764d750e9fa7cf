"""
Subordination
Generalized-subordination certificates for the Gribov operator matrix: derivation
from the couplings, merging, numerical verification on trial vectors, and the
closedness / self-adjointness / example conditions built from the bounds
"""

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import sparse

from ..errors import InvalidIndexError, InvalidInputError, InvalidParameterError, PreconditionWarning
from ..operators.bargmann_core import (
    BandedComplexMatrix,
    build_g,
    build_h0_beta,
    build_h1,
    build_s,
    build_scalar_gribov,
    check_truncation,
)
from ..operators.block_assembly import (
    BlockSpec,
    EntryParams,
    has_symmetric_couplings,
    off_diagonal_part,
    require_valid,
)

VERIFY_TOL = 1e-10


class GribovConstants:
    """Constants of the H0^3 / G comparison inequalities"""
    C1 = 5.0
    C2 = math.sqrt(1 + 2 ** 6)
    C3 = 1 + 2 * math.sqrt(2)


@dataclass(frozen=True)
class SubordinationCertificate:
    """
    Exponent/bound pairs (p_k, b_k) of the inequality
    ||T u|| <= sum_k b_k ||S u||^p_k ||u||^(1 - p_k).
    """
    terms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.terms:
            raise InvalidInputError("Certificate needs at least one term")
        for p, b in self.terms:
            if not (math.isfinite(p) and 0.0 <= p <= 1.0):
                raise InvalidInputError(f"Exponent {p} outside [0,1]")
            if not (math.isfinite(b) and b >= 0.0):
                raise InvalidInputError(f"Bound {b} must be finite and >= 0")

    @classmethod
    def of(cls, *terms: tuple[float, float]) -> "SubordinationCertificate":
        return cls(tuple((float(p), float(b)) for p, b in terms))

    @property
    def exponents(self) -> np.ndarray:
        return np.array([p for p, _ in self.terms])

    @property
    def bounds(self) -> np.ndarray:
        return np.array([b for _, b in self.terms])

    @property
    def total_bound(self) -> float:
        return float(self.bounds.sum())

    def leading(self) -> "SubordinationCertificate":
        """Terms with p > 0; the zero certificate if there are none"""
        kept = tuple(t for t in self.terms if t[0] > 0.0)
        return SubordinationCertificate(kept or ((0.0, 0.0),))

    def evaluate(self, s_norms, u_norms) -> np.ndarray:
        """Right-hand side for arrays of ||S u|| and ||u||, with 0^0 = 1"""
        s_norms = np.asarray(s_norms, dtype=float)
        u_norms = np.asarray(u_norms, dtype=float)
        total = np.zeros(np.broadcast(s_norms, u_norms).shape)
        for p, b in self.terms:
            if b == 0.0:
                continue
            total = total + b * np.power(s_norms, p) * np.power(u_norms, 1.0 - p)
        return total

    def to_dict(self) -> dict:
        return {
            "terms": [{"p": p, "b": b} for p, b in self.terms],
            "total_bound": self.total_bound,
        }


@dataclass(frozen=True)
class EntryBounds:
    b1: float
    b2: float
    b3: float

    def __iter__(self):
        return iter((self.b1, self.b2, self.b3))

    @property
    def total(self) -> float:
        return self.b1 + self.b2 + self.b3


@dataclass
class VerificationReport:
    """Slack statistics of one certificate over a set of trial vectors"""
    min_slack: float
    argmin: int
    argmin_vector: np.ndarray
    passed: bool
    tolerance: float
    trials: int
    failures: int

    def to_dict(self) -> dict:
        return {
            "min_slack": self.min_slack,
            "argmin": self.argmin,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "trials": self.trials,
            "failures": self.failures,
        }


@dataclass(frozen=True)
class ClosednessResult:
    value: float
    satisfied: bool


@dataclass(frozen=True)
class SelfAdjointnessResult:
    """symmetric reports whether (i,j) and (j,i) entries carry equal couplings"""
    applicable: bool
    value: float
    satisfied: bool
    symmetric: bool


@dataclass(frozen=True)
class ExampleP6Result:
    gamma: float
    condition_sum: float
    S: float
    S_bound: float
    satisfied: bool
    hypotheses_met: bool

    @property
    def s_below_seven_eighteenths(self) -> bool:
        return self.S < 7 / 18


# Certificates

def _check_pair(spec: BlockSpec, i: int, j: int):
    if i == j:
        raise InvalidIndexError(f"({i},{j}) is a diagonal position; entry bounds need i != j")
    if not (1 <= i <= spec.n and 1 <= j <= spec.n):
        raise InvalidIndexError(f"({i},{j}) outside a {spec.n}x{spec.n} block matrix")


def entry_bounds(spec: BlockSpec, i: int, j: int) -> EntryBounds:
    """
    Leading subordination bounds of entry (i,j) against lambda2_j * G.

    Returns:
        EntryBounds(b1, b2, b3) for the H0^beta, H1 and S terms
    """
    _check_pair(spec, i, j)
    params = spec.entry(i, j)
    magic = abs(spec.magic(j))
    c1, c3 = GribovConstants.C1, GribovConstants.C3
    third = params.beta / 3

    b1 = abs(params.mu) * c1 ** third / magic ** third
    b2 = abs(params.lambda_) * c3 * math.sqrt(c1) / math.sqrt(magic)
    b3 = abs(params.lambda1) * c1 ** (2 / 3) / magic ** (2 / 3)
    return EntryBounds(b1, b2, b3)


def _constant_term(params: EntryParams) -> float:
    c2, c3 = GribovConstants.C2, GribovConstants.C3
    return (abs(params.mu) * c2 ** (params.beta / 3)
            + abs(params.lambda_) * c3 * math.sqrt(c2)
            + abs(params.lambda1) * c2 ** (2 / 3))


def entry_certificate(
    spec: BlockSpec,
    i: int,
    j: int,
    include_constant_terms: bool = False,
) -> SubordinationCertificate:
    """Certificate of entry (i,j) against the diagonal entry of column j"""
    b1, b2, b3 = entry_bounds(spec, i, j)
    terms = [(spec.entry(i, j).beta / 3, b1), (0.5, b2), (2 / 3, b3)]
    if include_constant_terms:
        terms.append((0.0, _constant_term(spec.entry(i, j))))
    return SubordinationCertificate.of(*terms)


def merge_certificates(
    per_entry: Mapping[tuple[int, int], SubordinationCertificate],
) -> SubordinationCertificate:
    """Multiset union of the per-entry terms, in mapping order"""
    if not per_entry:
        raise InvalidInputError("Cannot merge an empty set of certificates")
    return SubordinationCertificate(tuple(term for cert in per_entry.values() for term in cert.terms))


def gribov_certificate(spec: BlockSpec, include_constant_terms: bool = False) -> SubordinationCertificate:
    """R against D for the whole block matrix, merged over the off-diagonal set"""
    require_valid(spec)
    return merge_certificates({
        (i, j): entry_certificate(spec, i, j, include_constant_terms)
        for i, j in spec.omega()
    })


def compact_certificate(spec: BlockSpec) -> SubordinationCertificate:
    """{(beta_ij/3, b1_ij)} plus (1/2, sum b2) and (2/3, sum b3)"""
    require_valid(spec)
    terms = []
    b2_sum = b3_sum = 0.0
    for i, j in spec.omega():
        bounds = entry_bounds(spec, i, j)
        terms.append((spec.entry(i, j).beta / 3, bounds.b1))
        b2_sum += bounds.b2
        b3_sum += bounds.b3
    terms += [(0.5, b2_sum), (2 / 3, b3_sum)]
    return SubordinationCertificate.of(*terms)


# Verification

def basis_vectors(N: int) -> sparse.csc_matrix:
    """e_1..e_N as sparse columns"""
    check_truncation(N)
    return sparse.identity(N, dtype=complex, format="csc")


def random_vectors(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """count seeded complex Gaussian columns of length dim"""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))


def _operand(M):
    if isinstance(M, BandedComplexMatrix):
        return M.entries
    if sparse.issparse(M):
        return M
    return np.asarray(M, dtype=complex)


def _column_norms(X) -> np.ndarray:
    if sparse.issparse(X):
        return np.sqrt(np.asarray(abs(X).power(2).sum(axis=0)).ravel())
    return np.linalg.norm(X, axis=0)


def verify_subordination(
    T_img,
    S_img,
    cert: SubordinationCertificate,
    trial_vectors,
) -> VerificationReport:
    """
    Check ||T u|| <= sum b_k ||S u||^p_k ||u||^(1-p_k) on every trial column.

    Each slack must be >= -VERIFY_TOL * max(1, rhs(u), ||T u||).

    Args:
        T_img: Dominated operator, exact-image form for unbounded compositions
        S_img: Dominating operator with the same column count
        cert: Terms to test
        trial_vectors: Dense or sparse matrix, one trial vector per column
    """
    T, S, U = _operand(T_img), _operand(S_img), _operand(trial_vectors)
    if U.ndim == 1:
        U = U.reshape(-1, 1)
    if T.shape[1] != S.shape[1]:
        raise InvalidInputError(f"Operators act on different spaces: {T.shape[1]} vs {S.shape[1]} columns")
    if U.shape[0] != T.shape[1]:
        raise InvalidInputError(f"Trial vectors have length {U.shape[0]}, operators expect {T.shape[1]}")
    if U.shape[1] == 0:
        raise InvalidInputError("No trial vectors given")

    t_norms = _column_norms(T @ U)
    s_norms = _column_norms(S @ U)
    u_norms = _column_norms(U)

    rhs = cert.evaluate(s_norms, u_norms)
    slack = rhs - t_norms
    scale = np.maximum(1.0, np.maximum(rhs, t_norms))
    failures = slack < -VERIFY_TOL * scale

    worst = int(np.argmin(slack))
    column = U[:, worst]
    column = column.toarray().ravel() if sparse.issparse(column) else np.asarray(column).ravel()
    return VerificationReport(
        min_slack=float(slack[worst]),
        argmin=worst,
        argmin_vector=column,
        passed=not failures.any(),
        tolerance=VERIFY_TOL,
        trials=U.shape[1],
        failures=int(failures.sum()),
    )


def verify_entry(spec: BlockSpec, i: int, j: int, N: int, trial_vectors=None) -> VerificationReport:
    """
    Entry (i,j) against lambda2_j * G with the constant-augmented certificate.

    Defaults to the basis vectors e_1..e_N.
    """
    require_valid(spec)
    check_truncation(N)
    cert = entry_certificate(spec, i, j, include_constant_terms=True)
    T = build_scalar_gribov(N, spec.entry(i, j).as_pomeron(), exact_image=True)
    S = build_g(N, N + 1).scaled(spec.magic(j))
    vectors = basis_vectors(N) if trial_vectors is None else trial_vectors
    return verify_subordination(T, S, cert, vectors)


def verify_block(spec: BlockSpec, N: int, trial_vectors=None) -> VerificationReport:
    """R (exact image) against D with the merged constant-augmented certificate"""
    require_valid(spec)
    check_truncation(N)
    cert = gribov_certificate(spec, include_constant_terms=True)
    R = off_diagonal_part(spec, N, exact_image=True)
    D = sparse.block_diag(
        [build_g(N, N + 1).entries * spec.magic(j) for j in range(1, spec.n + 1)],
        format="csr",
    )
    vectors = basis_vectors(spec.n * N) if trial_vectors is None else trial_vectors
    return verify_subordination(R, D, cert, vectors)


def bargmann_inequalities(beta: float, N: int) -> list[tuple[str, BandedComplexMatrix, BandedComplexMatrix, SubordinationCertificate]]:
    """
    Comparison inequalities between H0^beta, S, H1, H0^3 and G.

    Every operator is in exact-image form on N+1 rows, so the harnesses can be
    fed straight to verify_subordination.

    Returns:
        (name, T, S, certificate) tuples
    """
    check_truncation(N)
    if not (math.isfinite(beta) and 0.0 < beta < 3.0):
        raise InvalidParameterError(f"beta must lie in (0,3), got {beta}")
    c1, c2, c3 = GribovConstants.C1, GribovConstants.C2, GribovConstants.C3
    rows = N + 1
    cubed = build_h0_beta(N, 3.0, rows)
    g = build_g(N, rows)
    h0_beta = build_h0_beta(N, beta, rows)
    s = build_s(N, rows)
    h1 = build_h1(N, exact_image=True)
    of = SubordinationCertificate.of

    return [
        ("h0_cubed_by_g", cubed, g, of((1.0, c1), (0.0, c2))),
        ("h0_beta_by_h0_cubed", h0_beta, cubed, of((beta / 3, 1.0))),
        ("h0_beta_by_g", h0_beta, g, of((beta / 3, c1 ** (beta / 3)), (0.0, c2 ** (beta / 3)))),
        ("s_by_h0_cubed", s, cubed, of((2 / 3, 1.0))),
        ("s_by_g", s, g, of((2 / 3, c1 ** (2 / 3)), (0.0, c2 ** (2 / 3)))),
        ("h1_by_h0_three_halves", h1, build_h0_beta(N, 1.5, rows), of((1.0, c3))),
        ("h1_by_h0_cubed", h1, cubed, of((0.5, c3))),
        ("h1_by_g", h1, g, of((0.5, c3 * math.sqrt(c1)), (0.0, c3 * math.sqrt(c2)))),
    ]


# Conditions

def closedness_margin(spec: BlockSpec) -> ClosednessResult:
    """sum over the off-diagonal set of beta*b1/3 + b2/2 + 2*b3/3, against 1"""
    require_valid(spec)
    value = 0.0
    for i, j in spec.omega():
        b1, b2, b3 = entry_bounds(spec, i, j)
        value += spec.entry(i, j).beta * b1 / 3 + b2 / 2 + 2 * b3 / 3
    return ClosednessResult(value=value, satisfied=value < 1)


def selfadjointness_check(spec: BlockSpec) -> SelfAdjointnessResult:
    """Applicable only without triple couplings; value drops the b2 terms"""
    require_valid(spec)
    applicable = all(spec.entry(i, j).lambda_ == 0 for i, j in spec.omega())
    value = 0.0
    for i, j in spec.omega():
        b1, _, b3 = entry_bounds(spec, i, j)
        value += spec.entry(i, j).beta * b1 / 3 + 2 * b3 / 3
    return SelfAdjointnessResult(
        applicable=applicable,
        value=value,
        satisfied=applicable and value < 1,
        symmetric=has_symmetric_couplings(spec),
    )


# Example family

def _example_weights(n: int, a: float) -> dict[tuple[int, int], float]:
    weights = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            weights[(i, j)] = 1 / 3 if {i, j} == {1, 2} else a ** -(i + j)
    return weights


def _check_example_args(n: int, a: float, lambda2: float):
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise InvalidInputError(f"n must be an integer >= 2, got {n!r}")
    if not (math.isfinite(a) and a > 1):
        raise InvalidParameterError(f"a must be a finite number > 1, got {a}")
    if not math.isfinite(lambda2) or lambda2 == 0:
        raise InvalidParameterError(f"lambda2 must be finite and nonzero, got {lambda2}")


def example_p6_spec(n: int, a: float, lambda2: float) -> BlockSpec:
    """
    lambda2*diag(G, ..., G) with off-diagonal entries p_ij * H0^(3 p_ij),
    p_12 = p_21 = 1/3 and p_ij = a^-(i+j) elsewhere.
    """
    _check_example_args(n, a, lambda2)
    entries = {
        pair: EntryParams(mu=p, beta=3 * p)
        for pair, p in _example_weights(n, a).items()
    }
    return BlockSpec(n=n, diag_couplings=(float(lambda2),) * n, off_entries=entries)


def example_p6(n: int, a: float, lambda2: float) -> ExampleP6Result:
    """
    Self-adjointness condition of the geometric example family.

    Warns PreconditionWarning when a < 7/5 or gamma = c1/|lambda2| >= 1;
    the values are computed either way.
    """
    _check_example_args(n, a, lambda2)
    gamma = GribovConstants.C1 / abs(lambda2)
    a_ok = a >= 7 / 5
    gamma_ok = gamma < 1
    if not a_ok:
        warnings.warn(f"a = {a} is below 7/5", PreconditionWarning, stacklevel=2)
    if not gamma_ok:
        warnings.warn(f"gamma = {gamma} is not below 1", PreconditionWarning, stacklevel=2)

    weights = _example_weights(n, a)
    condition_sum = math.fsum(gamma ** p * p * p for p in weights.values())
    S = math.fsum(p * p for (i, j), p in weights.items() if 2 <= i < j)
    S_bound = 1 / (a ** 4 * (a ** 4 - 1) * (a ** 2 - 1))

    return ExampleP6Result(
        gamma=gamma,
        condition_sum=condition_sum,
        S=S,
        S_bound=S_bound,
        satisfied=condition_sum < 1,
        hypotheses_met=a_ok and gamma_ok,
    )
