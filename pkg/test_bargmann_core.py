"""
Test Bargmann Core
Finite-section matrices of H0, H0^beta, S, G, H1 and the scalar Gribov operator
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from src.errors import InvalidInputError, InvalidParameterError, InvalidTruncationError
from src.operators.bargmann_core import (
    BandedComplexMatrix,
    PomeronParams,
    build_g,
    build_h0,
    build_h0_beta,
    build_h1,
    build_s,
    build_scalar_gribov,
)


def monomial_h1_oracle(N: int, exact_image: bool = False) -> np.ndarray:
    """
    H1 = A*(A* + A)A applied to z^k / sqrt(k!) by differentiating and
    multiplying raw monomials, then re-expanded in the normalized basis.
    """
    rows = N + 1 if exact_image else N
    out = np.zeros((rows, N))
    for k in range(1, N + 1):
        poly = {k: 1}                                     # integer coefficients of z^m
        poly = {m - 1: c * m for m, c in poly.items() if m > 0}               # A
        both = {}
        for m, c in poly.items():
            both[m + 1] = both.get(m + 1, 0) + c                             # A*
            if m > 0:
                both[m - 1] = both.get(m - 1, 0) + c * m                     # A
        poly = {m + 1: c for m, c in both.items()}                           # A*
        for m, c in poly.items():
            if c == 0 or not 1 <= m <= rows:
                continue
            # c z^m / sqrt(k!) = c sqrt(m!/k!) e_m
            value = math.sqrt(Fraction(c * c * math.factorial(m), math.factorial(k)))
            out[m - 1, k - 1] = math.copysign(value, c)
    return out


def test_h0_is_number_operator():
    """Test diag(1, ..., N) and its trace"""
    assert np.array_equal(build_h0(3).to_dense(), np.diag([1, 2, 3]).astype(complex))
    assert np.array_equal(build_h0(1).to_dense(), np.array([[1.0 + 0j]]))
    for N in (1, 7, 50):
        assert build_h0(N).diagonal().sum().real == N * (N + 1) / 2


def test_truncation_must_be_positive():
    """Test that N = 0 and non-integers are rejected"""
    with pytest.raises(InvalidTruncationError):
        build_h0(0)
    with pytest.raises(InvalidTruncationError):
        build_g(2.5)
    with pytest.raises(InvalidTruncationError):
        build_s(True)


def test_h0_beta():
    """Test fractional powers of H0"""
    assert np.array_equal(build_h0_beta(6, 1.0).to_dense(), build_h0(6).to_dense())
    assert build_h0_beta(4, 3.0).entry(2, 2) == 8
    assert build_h0_beta(4, 1.5).entry(4, 4).real == pytest.approx(8.0, rel=1e-15)
    for beta in (0.0, -1.0, 3.5, float("nan")):
        with pytest.raises(InvalidParameterError):
            build_h0_beta(4, beta)


def test_s_and_g_diagonals():
    """Test k(k-1) and (k-2)(k-1)k"""
    assert np.array_equal(build_s(4).diagonal().real, [0, 2, 6, 12])
    assert build_s(10).entry(10, 10) == 90
    g = build_g(100)
    assert g.entry(1, 1) == 0 and g.entry(2, 2) == 0
    assert g.entry(5, 5) == 60
    assert g.entry(100, 100) == 970200
    assert g.is_diagonal


def test_h1_columns():
    """Test the first and third columns of H1"""
    h1 = build_h1(5)
    column1 = h1.to_dense()[:, 0]
    assert np.count_nonzero(column1) == 1
    assert h1.entry(2, 1) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert h1.entry(4, 3) == pytest.approx(6.0, rel=1e-15)
    assert h1.entry(2, 3) == pytest.approx(2 * math.sqrt(3), rel=1e-15)
    assert np.all(h1.diagonal() == 0)
    assert (h1.lower_bw, h1.upper_bw) == (1, 1)


def test_h1_matches_monomial_oracle():
    """Test H1 against the monomial calculus for N = 50"""
    for exact in (False, True):
        built = build_h1(50, exact_image=exact).to_dense()
        oracle = monomial_h1_oracle(50, exact_image=exact)
        assert built.shape == oracle.shape
        assert np.all(built.imag == 0)
        assert np.allclose(built.real, oracle, rtol=1e-14, atol=0)


def test_h1_square_truncation_is_symmetric():
    """Test that the finite section of H1 equals its transpose exactly"""
    h1 = build_h1(40).to_dense()
    assert np.array_equal(h1, h1.T)


def test_h1_exact_image_column_norms():
    """Test ||H1 e_k||^2 = k^2 (k+1) + (k-1)^2 k on the exact-image form"""
    N = 30
    h1 = build_h1(N, exact_image=True)
    assert h1.shape == (N + 1, N)
    k = np.arange(1, N + 1)
    expected = k ** 2 * (k + 1) + (k - 1) ** 2 * k
    assert np.allclose(h1.column_norms() ** 2, expected, rtol=1e-13)
    # the square section loses mass in the last column only
    square = build_h1(N).column_norms() ** 2
    assert np.allclose(square[:-1], expected[:-1], rtol=1e-13)
    assert square[-1] < expected[-1]


def test_scalar_gribov_reductions():
    """Test single-term reductions and the column-2 example"""
    N = 8
    g_only = build_scalar_gribov(N, PomeronParams(lambda2=1.0))
    assert np.array_equal(g_only.to_dense(), build_g(N).to_dense())

    intercept = build_scalar_gribov(N, PomeronParams(lambda2=0.0, mu=2.0))
    assert np.array_equal(intercept.to_dense(), 2 * build_h0(N).to_dense())

    full = build_scalar_gribov(N, PomeronParams(lambda2=1.0, lambda1=1.0, mu=1.0, lambda_=1.0))
    assert full.entry(1, 2) == pytest.approx(1j * math.sqrt(2))
    assert full.entry(2, 2) == pytest.approx(4.0)
    assert full.entry(3, 2) == pytest.approx(2j * math.sqrt(3))


def test_scalar_gribov_is_linear():
    """Test linearity in every coupling"""
    N = 12
    p = PomeronParams(lambda2=1.3, lambda1=-0.4, mu=0.7, lambda_=0.25, beta=1.7)
    q = PomeronParams(lambda2=-0.6, lambda1=0.9, mu=-1.1, lambda_=0.5, beta=1.7)
    total = PomeronParams(
        lambda2=p.lambda2 + q.lambda2,
        lambda1=p.lambda1 + q.lambda1,
        mu=p.mu + q.mu,
        lambda_=p.lambda_ + q.lambda_,
        beta=1.7,
    )
    lhs = build_scalar_gribov(N, total).to_dense()
    rhs = build_scalar_gribov(N, p).to_dense() + build_scalar_gribov(N, q).to_dense()
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(lhs).max())


def test_scalar_gribov_exact_image_shape():
    """Test the (N+1)xN exact-image form"""
    params = PomeronParams(lambda2=1.0, lambda_=0.5)
    exact = build_scalar_gribov(6, params, exact_image=True)
    assert exact.shape == (7, 6)
    assert exact.entry(7, 6) == pytest.approx(0.5j * 6 * math.sqrt(7))
    assert np.array_equal(exact.to_dense()[:6], build_scalar_gribov(6, params).to_dense())


def test_pomeron_params_validation():
    """Test beta range and finiteness"""
    with pytest.raises(InvalidParameterError):
        PomeronParams(lambda2=1.0, beta=3.0)
    with pytest.raises(InvalidParameterError):
        PomeronParams(lambda2=float("inf"))
    assert PomeronParams(lambda2=0.0, mu=1.0).pure_perturbation


def test_banded_matrix_rejects_wide_shapes():
    """Test that rows < cols is refused"""
    with pytest.raises(InvalidInputError):
        BandedComplexMatrix.from_dense(np.zeros((2, 3)))
    m = BandedComplexMatrix.from_dense(np.triu(np.ones((4, 4)), -1))
    assert (m.lower_bw, m.upper_bw) == (1, 3)
    with pytest.raises(InvalidInputError):
        m.entry(0, 1)
