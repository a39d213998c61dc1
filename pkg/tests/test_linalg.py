"""Tests for the dense and tridiagonal linear algebra kernels."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from krylov_query.config import Config, reset_config
from krylov_query.core.linalg import (
    TridiagonalReal,
    as_state,
    assert_hermitian,
    eig_hermitian_dense,
    eig_tridiagonal,
    eigh_tridiagonal_vectors,
    operator_scale,
    orthonormalize,
)
from krylov_query.errors import ConvergenceFailure, DimensionMismatch, EmptySpan, NotHermitian

from .conftest import random_hermitian


class TestAssertHermitian:
    def test_real_symmetric_accepted(self, pauli_x):
        H = assert_hermitian(pauli_x)
        assert H.dim == 2
        assert H.scale == 1.0

    def test_anti_hermitian_rejected(self):
        with pytest.raises(NotHermitian) as info:
            assert_hermitian([[0, 1j], [1j, 0]])
        assert info.value.max_deviation == pytest.approx(2.0)

    def test_tiny_asymmetry_within_tolerance(self):
        H = assert_hermitian([[1, 1 + 1e-15j], [1 - 1e-15j, 2]])
        np.testing.assert_allclose(H.matrix, H.matrix.conj().T, atol=0.0)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatch):
            assert_hermitian(np.zeros((2, 3)))

    def test_matrix_is_read_only(self, pauli_x):
        H = assert_hermitian(pauli_x)
        with pytest.raises(ValueError):
            H.matrix[0, 0] = 5.0

    def test_operator_scale_of_zero_matrix(self):
        assert operator_scale(np.zeros((3, 3))) == 1.0
        assert operator_scale(np.array([[1.0, -2.0], [0.5, 0.0]])) == 3.0


class TestStates:
    def test_normalized_on_ingest(self):
        psi = as_state([3.0, 4.0j])
        assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(EmptySpan):
            as_state([0.0, 0.0])


class TestTridiagonal:
    def test_offdiag_must_be_positive(self):
        with pytest.raises(ValueError):
            TridiagonalReal([0.0, 0.0], [0.0])

    def test_offdiag_length_checked(self):
        with pytest.raises(DimensionMismatch):
            TridiagonalReal([0.0, 0.0], [1.0, 1.0])

    def test_two_by_two_closed_form(self):
        eigenvalues, first = eig_tridiagonal(TridiagonalReal([0.0, 0.0], [1.0]))
        np.testing.assert_allclose(eigenvalues, [-1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(first, [2**-0.5, 2**-0.5], atol=1e-14)

    def test_one_by_one(self):
        eigenvalues, first = eig_tridiagonal(TridiagonalReal([3.5], []))
        assert eigenvalues.tolist() == [3.5]
        assert first.tolist() == [1.0]

    def test_lanczos_of_diagonal_keeps_spectrum(self):
        from krylov_query.core.lanczos import lanczos_decompose

        K = lanczos_decompose(np.diag([1.0, 2.0, 3.0]), np.ones(3))
        eigenvalues, first = eig_tridiagonal(K.jacobi)
        np.testing.assert_allclose(eigenvalues, [1.0, 2.0, 3.0], atol=1e-12)
        np.testing.assert_allclose(first**2, [1 / 3] * 3, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 40))
    def test_matches_scipy(self, seed, m):
        rng = np.random.default_rng(seed)
        diag = rng.uniform(-5.0, 5.0, m)
        offdiag = rng.uniform(0.01, 3.0, m - 1)
        eigenvalues, first = eig_tridiagonal(TridiagonalReal(diag, offdiag))
        expected, vectors = eigh_tridiagonal(diag, offdiag)
        np.testing.assert_allclose(eigenvalues, expected, atol=1e-10)
        np.testing.assert_allclose(first, np.abs(vectors[0]), atol=1e-8)
        assert np.all(first >= 0.0)
        assert np.sum(first**2) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 30))
    def test_full_eigenvectors(self, seed, m):
        rng = np.random.default_rng(seed)
        J = TridiagonalReal(rng.standard_normal(m), rng.uniform(0.1, 2.0, m - 1))
        eigenvalues, Q = eigh_tridiagonal_vectors(J)
        np.testing.assert_allclose(Q.T @ Q, np.eye(m), atol=1e-12)
        np.testing.assert_allclose(J.to_dense() @ Q, Q * eigenvalues, atol=1e-10)
        assert np.all(Q[0] >= 0.0)

    def test_sweep_cap_raises(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("linalg:\n  ql_sweeps_per_dim: 0\n")
        reset_config(Config(path))
        with pytest.raises(ConvergenceFailure):
            eig_tridiagonal(TridiagonalReal([0.0, 1.0, 2.0], [1.0, 1.0]))


class TestDenseEigensolver:
    def test_identity(self):
        eigenvalues, _ = eig_hermitian_dense(np.eye(4))
        np.testing.assert_allclose(eigenvalues, np.ones(4))

    def test_pauli_x(self, pauli_x):
        eigenvalues, _ = eig_hermitian_dense(pauli_x)
        np.testing.assert_allclose(eigenvalues, [-1.0, 1.0], atol=1e-15)

    def test_reconstruction(self, rng):
        H = random_hermitian(rng, 8)
        eigenvalues, U = eig_hermitian_dense(H)
        scale = operator_scale(H)
        assert np.linalg.norm(H - (U * eigenvalues) @ U.conj().T) <= 1e-10 * scale


class TestOrthonormalize:
    def test_independent(self):
        basis, rank = orthonormalize([[1.0, 0.0], [0.0, 1.0]])
        assert rank == 2
        np.testing.assert_allclose(basis, np.eye(2))

    def test_dependent_dropped(self):
        basis, rank = orthonormalize([[1.0, 0.0], [2.0, 0.0]])
        assert rank == 1
        np.testing.assert_allclose(basis[:, 0], [1.0, 0.0])

    def test_third_vector_in_span(self):
        s = 2**-0.5
        _, rank = orthonormalize([[s, s], [s, -s], [1.0, 0.0]])
        assert rank == 2

    def test_all_zero(self):
        with pytest.raises(EmptySpan):
            orthonormalize([[0.0, 0.0]])

    def test_gram_matrix(self, rng):
        vectors = rng.standard_normal((12, 20)) + 1j * rng.standard_normal((12, 20))
        basis, rank = orthonormalize(vectors)
        assert rank == 12
        gram = basis.conj().T @ basis
        assert np.abs(gram - np.eye(rank)).max() <= 1e-12
