"""
Test Eigensolver
Shifted QR, the Hermitian path, inverse iteration, counting and stabilization
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from src.errors import DefectiveClusterWarning, InvalidInputError, IterationLimitError
from src.operators.bargmann_core import PomeronParams, build_g, build_h0, build_s, build_scalar_gribov
from src.operators.block_assembly import BlockSpec, EntryParams, assemble
from src.spectral import eigensolver
from src.spectral.eigensolver import (
    counting,
    eigenvalues,
    eigenvectors,
    hessenberg,
    mark_stabilized,
    pair_residual,
    stabilized_spectrum,
    with_residual,
)


def random_unitary(n: int, rng) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def assert_same_multiset(computed, expected, rtol):
    computed = np.asarray(computed)
    expected = np.asarray(expected)
    assert len(computed) == len(expected)
    scale = max(1.0, np.abs(expected).max())
    gap = np.abs(computed[:, None] - expected[None, :])
    assert gap.min(axis=1).max() <= rtol * scale
    assert gap.min(axis=0).max() <= rtol * scale


def test_diagonal_operators_are_exact():
    """Test k, k(k-1), (k-2)(k-1)k for N = 200 with zero tolerance"""
    N = 200
    k = np.arange(1, N + 1, dtype=float)
    for matrix, expected in (
        (build_h0(N), k),
        (build_s(N), k * (k - 1)),
        (build_g(N), (k - 2) * (k - 1) * k),
    ):
        spectrum = eigenvalues(matrix)
        assert np.array_equal(spectrum.eigenvalues, np.sort(expected).astype(complex))
        assert spectrum.residual_bound == 0.0
        assert spectrum.backward_error == 0.0


def test_g_spectrum_small():
    """Test build_g(10) eigenvalues"""
    values = eigenvalues(build_g(10)).eigenvalues
    assert np.array_equal(values.real, [0, 0, 6, 24, 60, 120, 210, 336, 504, 720])


def test_companion_matrix():
    """Test the roots of z^2 + 1"""
    spectrum = eigenvalues(np.array([[0, -1], [1, 0]], dtype=complex))
    assert not spectrum.hermitian
    assert spectrum.eigenvalues[0] == pytest.approx(1j, abs=1e-14)
    assert spectrum.eigenvalues[1] == pytest.approx(-1j, abs=1e-14)


def test_random_normal_matrix():
    """Test Q diag(d) Q* recovers d to 1e-10 relative"""
    rng = np.random.default_rng(0)
    n = 60
    d = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    Q = random_unitary(n, rng)
    spectrum = eigenvalues(Q @ np.diag(d) @ Q.conj().T)
    assert_same_multiset(spectrum.eigenvalues, d, 1e-10)
    assert spectrum.backward_error >= 0
    assert spectrum.residual_bound is None


def test_hessenberg_reduction():
    """Test reconstruction, unitarity and the no-op on tridiagonal input"""
    rng = np.random.default_rng(1)
    M = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
    H, Q = hessenberg(M)
    assert not np.any(np.tril(H, -2))
    assert np.linalg.norm(Q @ H @ Q.conj().T - M) <= 1e-12 * np.linalg.norm(M)
    assert np.linalg.norm(Q.conj().T @ Q - np.eye(50)) <= 1e-12 * 50

    tri = build_scalar_gribov(12, PomeronParams(lambda2=1.0, lambda_=0.4)).to_dense()
    H, Q = hessenberg(tri)
    assert np.array_equal(H, tri)
    assert np.array_equal(Q, np.eye(12))

    diag = build_g(7).to_dense()
    H, _ = hessenberg(diag)
    assert np.array_equal(H, diag)


def test_trace_and_dimension_300():
    """Test the trace identity on a dim-300 random matrix"""
    rng = np.random.default_rng(2)
    M = rng.standard_normal((300, 300)) + 1j * rng.standard_normal((300, 300))
    started = time.perf_counter()
    spectrum = eigenvalues(M)
    assert time.perf_counter() - started < 10.0
    assert spectrum.dimension == 300
    assert abs(spectrum.eigenvalues.sum() - np.trace(M)) <= 1e-9 * np.linalg.norm(M)


def test_unitary_similarity_invariance():
    """Test eigenvalues(Q M Q*) = eigenvalues(M)"""
    rng = np.random.default_rng(3)
    M = rng.standard_normal((80, 80)) + 1j * rng.standard_normal((80, 80))
    Q = random_unitary(80, rng)
    a = eigenvalues(M).eigenvalues
    b = eigenvalues(Q @ M @ Q.conj().T).eigenvalues
    assert_same_multiset(a, b, 1e-10)


def test_gribov_block_matches_reference_solver():
    """Test a non-normal Gribov matrix against LAPACK"""
    entry = EntryParams(lambda_=0.5)
    spec = BlockSpec(n=2, diag_couplings=(1.0, 1.0), off_entries={(1, 2): entry, (2, 1): entry})
    M = assemble(spec, 20).to_dense()
    ours = eigenvalues(M).eigenvalues
    reference = np.linalg.eigvals(M)
    assert_same_multiset(ours, reference, 1e-10)


def test_hermitian_path_returns_real_values():
    """Test exactly zero imaginary parts on Hermitian input"""
    rng = np.random.default_rng(4)
    Z = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    H = Z + Z.conj().T
    spectrum = eigenvalues(H)
    assert spectrum.hermitian
    assert np.max(np.abs(spectrum.eigenvalues.imag)) == 0.0
    assert_same_multiset(spectrum.eigenvalues, np.linalg.eigvalsh(H), 1e-12)


def test_sorted_by_modulus_then_phase():
    """Test the deterministic ordering"""
    values = eigenvalues(np.diag([-1.0, 1j, 1.0, 0.5, -1j])).eigenvalues
    assert values.tolist() == [0.5, 1.0, 1j, -1.0, -1j]


def test_iteration_limit_keeps_partial_deflations(monkeypatch):
    """Test that an exhausted sweep budget reports what was deflated"""
    monkeypatch.setattr(eigensolver, "SWEEP_FACTOR", 0)
    M = np.array([[1, 2, 3], [4, 5, 6], [0, 0, 7]], dtype=complex)
    with pytest.raises(IterationLimitError) as info:
        eigenvalues(M)
    assert info.value.iterations == 0
    assert info.value.partial_eigenvalues.tolist() == [7]


def test_non_square_rejected():
    """Test the square precondition"""
    with pytest.raises(InvalidInputError):
        eigenvalues(np.zeros((3, 2)))
    with pytest.raises(InvalidInputError):
        eigenvalues(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(InvalidInputError, match="square section"):
        eigenvalues(build_scalar_gribov(6, PomeronParams(lambda2=1.0, lambda_=0.3), exact_image=True))


def test_eigenvectors_hermitian_are_unitary():
    """Test V*V = I for Hermitian input, including a double eigenvalue"""
    rng = np.random.default_rng(5)
    Q = random_unitary(30, rng)
    d = np.concatenate([[2.0, 2.0], rng.uniform(3, 10, 28)])
    H = Q @ np.diag(d) @ Q.conj().T
    H = (H + H.conj().T) / 2
    spectrum = eigenvalues(H)
    V = eigenvectors(H, spectrum)
    assert np.linalg.norm(V.conj().T @ V - np.eye(30)) <= 1e-8
    assert pair_residual(H, spectrum, V) <= 1e-8


def test_eigenvectors_diagonal_are_permutation():
    """Test V is a permutation of the identity for diagonal input"""
    D = np.diag([3.0, 1.0, 2.0])
    spectrum = eigenvalues(D)
    V = eigenvectors(D, spectrum)
    assert np.array_equal(np.abs(V), np.eye(3)[:, [1, 2, 0]])


def test_eigenvectors_non_normal_residual():
    """Test unit columns and small residuals on a Gribov matrix"""
    M = build_scalar_gribov(25, PomeronParams(lambda2=1.0, lambda_=0.3))
    spectrum = eigenvalues(M)
    V = eigenvectors(M, spectrum)
    assert np.allclose(np.linalg.norm(V, axis=0), 1.0)
    assert pair_residual(M, spectrum, V) <= 1e-8


def test_residual_bound_from_eigenpairs():
    """Test that residual_bound is the largest eigenpair residual"""
    M = build_scalar_gribov(25, PomeronParams(lambda2=1.0, lambda_=0.3))
    spectrum = eigenvalues(M)
    assert spectrum.residual_bound is None

    V = eigenvectors(M, spectrum)
    attached = with_residual(M, spectrum, V)
    assert attached.residual_bound == pair_residual(M, spectrum, V)
    assert 0.0 <= attached.residual_bound <= 1e-8
    assert np.array_equal(attached.eigenvalues, spectrum.eigenvalues)

    # a perturbed eigenvalue shows up in the residual
    shifted = replace(spectrum, eigenvalues=spectrum.eigenvalues + 1e-3 * np.linalg.norm(M.to_dense()))
    assert with_residual(M, shifted, V).residual_bound == pytest.approx(1e-3, rel=1e-3)
    assert with_residual(M, spectrum).residual_bound <= 1e-8


def test_near_defective_block_warns():
    """Test the perturbed Jordan block"""
    J = np.array([[1.0, 1.0], [0.0, 1.0 + 1e-8]])
    spectrum = eigenvalues(J)
    with pytest.warns(DefectiveClusterWarning):
        eigenvectors(J, spectrum)


def test_counting():
    """Test counting at 0, below the spectrum and at infinity"""
    spectrum = eigenvalues(build_g(10))
    assert counting(spectrum, 0.0) == 2
    assert counting(spectrum, 6.0) == 3
    assert counting(spectrum, math.inf) == 10
    assert counting(eigenvalues(build_h0(5)), 0.5) == 0
    with pytest.raises(InvalidInputError):
        counting(spectrum, -1.0)


def test_stabilized_diagonal_builder():
    """Test that diagonal spectra are stabilized everywhere"""
    spectrum = stabilized_spectrum(build_g, 40, growth=2.0, rel_tol=1e-12)
    assert spectrum.stability_checked
    assert spectrum.stabilized.all()
    assert (spectrum.truncation, spectrum.reference_truncation) == (40, 80)


def test_stabilized_growth_must_exceed_one():
    """Test the growth > 1 precondition"""
    with pytest.raises(InvalidInputError):
        stabilized_spectrum(build_g, 10, growth=1.0)


def test_stabilized_scalar_gribov():
    """Test low-lying eigenvalues stabilize while the top of the section does not"""
    params = PomeronParams(lambda2=1.0, lambda_=0.1)
    build = lambda N: build_scalar_gribov(N, params)

    spectrum = stabilized_spectrum(build, 100, growth=2.0, rel_tol=1e-6, max_workers=2)
    assert spectrum.stabilized[:20].all()

    # the last section eigenvalue misses a neighbour coupling of order lambda^2 k
    strict = mark_stabilized(eigenvalues(build(100)), eigenvalues(build(200)), 1e-8)
    assert not strict.stabilized[-1]

    serial = stabilized_spectrum(build, 100, growth=2.0, rel_tol=1e-6, max_workers=1)
    assert np.array_equal(serial.stabilized, spectrum.stabilized)
