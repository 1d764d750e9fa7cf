"""
Spectral Analysis
Enclosure regions (ball plus sectors around rays), counting-function asymptotics
and Riesz-basis diagnostics over computed spectra
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as la

from ..errors import (
    IllSeparatedClustersError,
    InvalidInputError,
    InvalidParameterError,
    UnsupportedConfigurationError,
)
from ..operators.block_assembly import BlockSpec, require_valid
from .eigensolver import MatrixLike, SpectrumResult, as_dense, eigenvalues, eigenvector_pairs, pair_residual
from .subordination import compact_certificate, entry_bounds

R0_SLACK = 1e-9
ALPHA_FLOOR = 1e-12
SEPARATION_TOL = 1e-12

EXPONENT_RULES = ("literal", "certificate")


@dataclass(frozen=True)
class EnclosureRegion:
    """
    Ball of radius r0 united with sectors
    {e^(i theta)(x + iy) : x >= 0, |y| <= alpha * max_k x^p_k}, one per ray.
    alpha > 0 and r0 >= 0.
    """
    r0: float
    rays: tuple[float, ...]
    alpha: float
    exponents: tuple[float, ...]
    rule: str = "literal"

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        if not self.r0 >= 0:
            raise InvalidInputError(f"r0 must be >= 0, got {self.r0}")

    def to_dict(self) -> dict:
        return {
            "r0": self.r0,
            "rays": list(self.rays),
            "alpha": self.alpha,
            "exponents": list(self.exponents),
            "rule": self.rule,
        }


@dataclass(frozen=True)
class RieszDiagnostics:
    eigvec_condition: float
    clusters: list[list[int]]
    projector_condition: float
    departure: float
    residual_bound: float

    def to_dict(self) -> dict:
        return {
            "eigvec_condition": self.eigvec_condition,
            "clusters": self.clusters,
            "cluster_count": len(self.clusters),
            "projector_condition": self.projector_condition,
            "departure_from_normality": self.departure,
            "residual_bound": self.residual_bound,
        }


class CountingPoint(NamedTuple):
    k: int
    r_k: float
    ratio: float


# Enclosure

def _rotation(theta: float) -> complex:
    """e^(-i theta) with exact zeros on the axes"""
    c, s = math.cos(theta), math.sin(theta)
    c = 0.0 if abs(c) < 1e-15 else c
    s = 0.0 if abs(s) < 1e-15 else s
    return complex(c, -s)


def membership(region: EnclosureRegion, values) -> np.ndarray:
    """Vectorized in_region over an array of complex numbers"""
    z = np.asarray(values, dtype=complex)
    inside = np.abs(z) <= region.r0
    exponents = np.asarray(region.exponents, dtype=float)
    for theta in region.rays:
        w = z * _rotation(theta)
        x = w.real
        x_safe = np.maximum(x, 0.0)
        if len(exponents):
            width = region.alpha * np.max(np.power.outer(x_safe, exponents), axis=-1)
        else:
            width = np.zeros_like(x_safe)
        inside |= (x >= 0) & (np.abs(w.imag) <= width)
    return inside


def in_region(region: EnclosureRegion, z: complex) -> bool:
    return bool(membership(region, np.array([z]))[0])


def _ray_set(spec: BlockSpec) -> tuple[float, ...]:
    if all(c > 0 for c in spec.diag_couplings):
        return (0.0,)
    if all(c < 0 for c in spec.diag_couplings):
        return (math.pi,)
    raise UnsupportedConfigurationError(
        f"Diagonal couplings of mixed sign {spec.diag_couplings}; no enclosure rays defined"
    )


def region_exponents(spec: BlockSpec, rule: str = "literal") -> tuple[float, ...]:
    """
    Sector exponents of the block matrix.

    literal: {2/3} together with beta_ij of every nonzero entry.
    certificate: exponents of the compact certificate terms with a positive bound.
    """
    if rule == "literal":
        exps = {2 / 3}
        exps.update(spec.entry(i, j).beta for i, j in spec.omega() if not spec.entry(i, j).is_zero)
    elif rule == "certificate":
        exps = {p for p, b in compact_certificate(spec).terms if b > 0} or {2 / 3}
    else:
        raise InvalidInputError(f"Unknown exponent rule {rule!r}; expected one of {EXPONENT_RULES}")
    return tuple(sorted(exps))


def gribov_region(
    spec: BlockSpec,
    alpha_margin: float,
    spectrum: SpectrumResult,
    rule: str = "literal",
) -> EnclosureRegion:
    """
    Enclosure of the stabilized spectrum of assemble(spec, N).

    alpha = (1 + alpha_margin) * sum of b1 + b2 + b3 over the off-diagonal set,
    or ALPHA_FLOOR when every entry bound vanishes so the sectors shrink to rays.
    r0 is the smallest ball radius (plus R0_SLACK) catching every stabilized
    eigenvalue that misses the sectors; 0 when none does.

    Raises:
        UnsupportedConfigurationError: diagonal couplings of mixed sign
    """
    require_valid(spec)
    if not alpha_margin > 0:
        raise InvalidInputError(f"alpha_margin must be positive, got {alpha_margin}")
    rays = _ray_set(spec)
    bound_sum = math.fsum(entry_bounds(spec, i, j).total for i, j in spec.omega())
    alpha = (1 + alpha_margin) * bound_sum if bound_sum > 0 else ALPHA_FLOOR
    exponents = region_exponents(spec, rule)

    sectors = EnclosureRegion(r0=0.0, rays=rays, alpha=alpha, exponents=exponents, rule=rule)
    stable = spectrum.stable_eigenvalues()
    outside = stable[~membership(sectors, stable)]
    r0 = float(np.abs(outside).max()) + R0_SLACK if len(outside) else 0.0
    return EnclosureRegion(r0=r0, rays=rays, alpha=alpha, exponents=exponents, rule=rule)


# Counting function

def counting_asymptotics(lambda2: float, k_max: int) -> list[CountingPoint]:
    """
    Radii r_k midway between consecutive eigenvalues of lambda2 * G and the
    ratio k / r_k^(1/3), which tends to lambda2^(-1/3).
    """
    if not (math.isfinite(lambda2) and lambda2 > 0):
        raise InvalidParameterError(f"lambda2 must be positive, got {lambda2}")
    if isinstance(k_max, bool) or not isinstance(k_max, int) or k_max < 3:
        raise InvalidInputError(f"k_max must be an integer >= 3, got {k_max!r}")
    points = []
    for k in range(3, k_max + 1):
        r_k = lambda2 * (k - 1) * k * (2 * k - 1) / 2
        points.append(CountingPoint(k, r_k, k / r_k ** (1 / 3)))
    return points


# Riesz diagnostics

def _condition(W: np.ndarray) -> float:
    if W.shape[1] == 0:
        return 1.0
    sigma = la.svdvals(W)
    if sigma[-1] == 0.0:
        return math.inf
    return float(sigma[0] / sigma[-1])


def _spectrum_of(M: MatrixLike, spectrum: SpectrumResult | None) -> SpectrumResult:
    return eigenvalues(M) if spectrum is None else spectrum


def eigenbasis_condition(
    M: MatrixLike,
    spectrum: SpectrumResult | None = None,
    indices=None,
) -> float:
    """
    2-norm condition number of the unit-column eigenvector matrix.

    inf when inverse iteration reports a defective cluster.
    """
    spectrum = _spectrum_of(M, spectrum)
    V, defective = eigenvector_pairs(M, spectrum)
    cols = np.arange(spectrum.dimension) if indices is None else np.asarray(indices, dtype=int)
    if defective[cols].any():
        return math.inf
    return _condition(V[:, cols])


def cluster_parentheses(
    spectrum: SpectrumResult,
    gap_factor: float,
    exponent: float = 2 / 3,
    indices=None,
) -> list[list[int]]:
    """
    Group eigenvalues into contiguous modulus bands.

    A new group starts when the modulus jumps by more than
    gap_factor * (1 + |lambda_prev|)^exponent. Only stabilized
    eigenvalues are grouped unless indices are given.
    """
    if not gap_factor > 0:
        raise InvalidInputError(f"gap_factor must be positive, got {gap_factor}")
    idx = spectrum.stable_indices() if indices is None else np.asarray(indices, dtype=int)
    if len(idx) == 0:
        return []
    modulus = np.abs(spectrum.eigenvalues[idx])
    order = idx[np.argsort(modulus, kind="stable")]

    clusters = [[int(order[0])]]
    previous = abs(spectrum.eigenvalues[order[0]])
    for j in order[1:]:
        current = abs(spectrum.eigenvalues[j])
        if current - previous > gap_factor * (1 + previous) ** exponent:
            clusters.append([])
        clusters[-1].append(int(j))
        previous = current
    return clusters


def riesz_constant(
    M: MatrixLike,
    clusters: list[list[int]],
    spectrum: SpectrumResult | None = None,
    V: np.ndarray | None = None,
) -> float:
    """
    Condition number of the cluster-wise block-diagonalizing similarity.

    Each cluster's invariant subspace is represented by an orthonormal basis
    of its eigenvector columns; the result is kappa_2 of the stacked bases W.
    Singleton clusters reproduce the condition of the unit eigenvectors.

    Raises:
        IllSeparatedClustersError: two cluster subspaces overlap numerically
    """
    if V is None:
        V, _ = eigenvector_pairs(M, _spectrum_of(M, spectrum))
    columns = [j for cluster in clusters for j in cluster]
    if len(set(columns)) != len(columns):
        raise InvalidInputError("Clusters must be disjoint")
    if not columns:
        return 1.0

    blocks = []
    for cluster in clusters:
        Q, _ = np.linalg.qr(V[:, cluster])
        blocks.append(Q)
    W = np.hstack(blocks)

    sigma = la.svdvals(W)
    if sigma[-1] <= SEPARATION_TOL * sigma[0]:
        raise IllSeparatedClustersError(
            f"Cluster subspaces overlap: smallest singular value {sigma[-1]:.3e}"
        )
    return float(sigma[0] / sigma[-1])


def departure_from_normality(M: MatrixLike, spectrum: SpectrumResult | None = None) -> float:
    """Henrici number sqrt(||M||_F^2 - sum |lambda|^2) / ||M||_F, 0 for normal M"""
    A = as_dense(M)
    norm = np.linalg.norm(A)
    if norm == 0.0:
        return 0.0
    spectrum = _spectrum_of(A, spectrum)
    excess = norm ** 2 - float(np.sum(np.abs(spectrum.eigenvalues) ** 2))
    return math.sqrt(max(excess, 0.0)) / norm


def riesz_diagnostics(
    M: MatrixLike,
    spectrum: SpectrumResult | None = None,
    gap_factor: float = 0.5,
    exponent: float = 2 / 3,
) -> RieszDiagnostics:
    """Eigenbasis condition, parentheses and their condition over the stabilized eigenvalues"""
    spectrum = _spectrum_of(M, spectrum)
    V, defective = eigenvector_pairs(M, spectrum)
    stable = spectrum.stable_indices()

    eigvec = math.inf if defective[stable].any() else _condition(V[:, stable])
    clusters = cluster_parentheses(spectrum, gap_factor, exponent, stable)
    projector = riesz_constant(M, clusters, spectrum, V)
    return RieszDiagnostics(
        eigvec_condition=eigvec,
        clusters=clusters,
        projector_condition=projector,
        departure=departure_from_normality(M, spectrum),
        residual_bound=pair_residual(M, spectrum, V),
    )
