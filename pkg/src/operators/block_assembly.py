"""
Block Assembly
Assembles the n x n Gribov operator matrix M = D + R as one (nN)x(nN) matrix,
and its four-part decomposition D + S-part + H-part + H0^beta-part
"""

import math
import numbers
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from scipy import sparse

from ..errors import InvalidParameterError
from .bargmann_core import (
    BandedComplexMatrix,
    PomeronParams,
    build_g,
    build_scalar_gribov,
    check_truncation,
)


@dataclass(frozen=True)
class EntryParams:
    """Couplings of one off-diagonal entry; the default is the zero entry"""
    lambda1: float = 0.0
    lambda_: float = 0.0
    mu: float = 0.0
    beta: float = 1.0

    @property
    def is_zero(self) -> bool:
        return self.lambda1 == 0.0 and self.lambda_ == 0.0 and self.mu == 0.0

    def as_pomeron(self) -> PomeronParams:
        return PomeronParams(lambda2=0.0, lambda1=self.lambda1, mu=self.mu,
                             lambda_=self.lambda_, beta=self.beta)


@dataclass(frozen=True)
class BlockSpec:
    """
    Parameterization of the n x n Gribov matrix.

    Indices are 1-based. Pairs of the off-diagonal set missing from
    off_entries are zero entries.
    """
    n: int
    diag_couplings: tuple[float, ...]
    off_entries: dict[tuple[int, int], EntryParams] = field(default_factory=dict)

    def omega(self) -> list[tuple[int, int]]:
        """Off-diagonal index pairs in row-major order"""
        return [(i, j) for i in range(1, self.n + 1) for j in range(1, self.n + 1) if i != j]

    def entry(self, i: int, j: int) -> EntryParams:
        return self.off_entries.get((i, j), EntryParams())

    def magic(self, j: int) -> float:
        return self.diag_couplings[j - 1]


@dataclass(frozen=True)
class GribovParts:
    """D + S-part (lambda1 only) + H-part (lambda only) + H0^beta-part (mu only)"""
    diagonal: BandedComplexMatrix
    four: BandedComplexMatrix
    triple: BandedComplexMatrix
    intercept: BandedComplexMatrix

    def total(self) -> BandedComplexMatrix:
        return self.diagonal + self.four + self.triple + self.intercept


def _finite(value) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value)


def validate_spec(spec: BlockSpec) -> list[tuple[str, str]]:
    """
    Check every BlockSpec invariant.

    Returns:
        List of (field, reason) violations; empty iff the spec is valid
    """
    violations = []

    if isinstance(spec.n, bool) or not isinstance(spec.n, int) or spec.n < 2:
        violations.append(("n", "n must be an integer >= 2"))
        return violations

    if len(spec.diag_couplings) != spec.n:
        violations.append(("diag_couplings", f"expected {spec.n} couplings, got {len(spec.diag_couplings)}"))

    for j, value in enumerate(spec.diag_couplings, start=1):
        if not _finite(value):
            violations.append((f"diag_couplings[{j}]", "diag coupling not finite"))
        elif value == 0:
            violations.append((f"diag_couplings[{j}]", "diag coupling zero"))

    for (i, j), params in spec.off_entries.items():
        name = f"off_entries[{i},{j}]"
        if not (1 <= i <= spec.n and 1 <= j <= spec.n) or i == j:
            violations.append((name, "pair outside the off-diagonal index set"))
            continue
        for attr in ("lambda1", "lambda_", "mu", "beta"):
            if not _finite(getattr(params, attr)):
                violations.append((f"{name}.{attr}", "coupling not finite"))
        if _finite(params.beta) and not 0.0 < params.beta < 3.0:
            violations.append((f"{name}.beta", "beta out of (0,3)"))

    return violations


def require_valid(spec: BlockSpec):
    """Raise InvalidParameterError carrying every violation"""
    violations = validate_spec(spec)
    if violations:
        summary = "; ".join(f"{name}: {reason}" for name, reason in violations)
        raise InvalidParameterError(f"Invalid block spec: {summary}", violations)


def has_symmetric_couplings(spec: BlockSpec) -> bool:
    """True when entries (i,j) and (j,i) carry identical couplings"""
    return all(spec.entry(i, j) == spec.entry(j, i) for i, j in spec.omega() if i < j)


def _assemble(
    spec: BlockSpec,
    N: int,
    exact_image: bool,
    with_diagonal: bool,
    entry_params: Callable[[EntryParams], EntryParams | None],
    max_workers: int | None,
) -> BandedComplexMatrix:
    n = spec.n
    rows = N + 1 if exact_image else N
    blocks: list[list[sparse.spmatrix | None]] = [[None] * n for _ in range(n)]

    for j in range(1, n + 1):
        if with_diagonal:
            blocks[j - 1][j - 1] = build_g(N, rows).entries * spec.magic(j)
        else:
            blocks[j - 1][j - 1] = sparse.csr_matrix((rows, N), dtype=complex)

    jobs = []
    for i, j in spec.omega():
        params = entry_params(spec.entry(i, j))
        if params is not None and not params.is_zero:
            jobs.append(((i, j), params))

    def build(job):
        (i, j), params = job
        return (i, j), build_scalar_gribov(N, params.as_pomeron(), exact_image).entries

    if max_workers and max_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            built = list(pool.map(build, jobs))
    else:
        built = [build(job) for job in jobs]

    for (i, j), block in built:
        blocks[i - 1][j - 1] = block

    return BandedComplexMatrix.from_sparse(sparse.bmat(blocks, format="csr"))


def assemble(
    spec: BlockSpec,
    N: int,
    exact_image: bool = False,
    max_workers: int | None = None,
) -> BandedComplexMatrix:
    """
    Assemble M = D + R.

    Args:
        spec: Block parameterization
        N: Truncation size shared by all n copies
        exact_image: Stack (N+1)xN blocks so column norms equal untruncated images
        max_workers: Build off-diagonal blocks on this many threads

    Returns:
        (nN)x(nN) matrix, or n(N+1) x nN in exact-image form
    """
    require_valid(spec)
    check_truncation(N)
    return _assemble(spec, N, exact_image, True, lambda p: p, max_workers)


def split(spec: BlockSpec, N: int, exact_image: bool = False) -> GribovParts:
    """Four-part decomposition; the parts sum to assemble(spec, N)"""
    require_valid(spec)
    check_truncation(N)
    return GribovParts(
        diagonal=_assemble(spec, N, exact_image, True, lambda p: None, None),
        four=_assemble(spec, N, exact_image, False,
                       lambda p: EntryParams(lambda1=p.lambda1, beta=p.beta), None),
        triple=_assemble(spec, N, exact_image, False,
                         lambda p: EntryParams(lambda_=p.lambda_, beta=p.beta), None),
        intercept=_assemble(spec, N, exact_image, False,
                            lambda p: EntryParams(mu=p.mu, beta=p.beta), None),
    )


def off_diagonal_part(spec: BlockSpec, N: int, exact_image: bool = False) -> BandedComplexMatrix:
    """R alone (zero diagonal blocks)"""
    require_valid(spec)
    check_truncation(N)
    return _assemble(spec, N, exact_image, False, lambda p: p, None)


def diagonal_part(spec: BlockSpec, N: int) -> BandedComplexMatrix:
    """D = diag(lambda2_1 G, ..., lambda2_n G)"""
    require_valid(spec)
    check_truncation(N)
    return _assemble(spec, N, False, True, lambda p: None, None)
