"""Tests for joint Krylov spaces of state families."""
import numpy as np
import pytest

from krylov_query.core.duality import solve_duality
from krylov_query.core.family import (
    CRITERIA,
    StateFamily,
    family_decompose,
    family_query_complexity,
    span_residual,
)
from krylov_query.core.favard import TargetFunction
from krylov_query.core.lanczos import lanczos_decompose
from krylov_query.core.linalg import eig_tridiagonal
from krylov_query.errors import DimensionMismatch

from .conftest import random_hermitian, random_state

SQRT_HALF = 2**-0.5


@pytest.fixture
def disjoint_family():
    H = np.diag([1.0, 2.0, 3.0, 4.0])
    fam = StateFamily.from_amplitudes([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
    return H, fam


class TestStateFamily:
    def test_members_normalized(self):
        fam = StateFamily.from_amplitudes([[3.0, 4.0]])
        assert np.linalg.norm(fam.states[0].amplitudes) == pytest.approx(1.0)
        assert fam.r == 1
        assert fam.dim == 2

    def test_empty(self):
        with pytest.raises(ValueError):
            StateFamily(())

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatch):
            StateFamily.from_amplitudes([[1.0, 0.0], [1.0, 0.0, 0.0]])


class TestFamilyDecompose:
    def test_disjoint_supports(self, disjoint_family):
        H, fam = disjoint_family
        fd = family_decompose(H, fam)
        assert fd.per_state_dims == (2, 2)
        assert fd.m_fam == 4

    def test_identical_states(self, rng):
        H = random_hermitian(rng, 8)
        psi = random_state(rng, 8)
        fd = family_decompose(H, StateFamily.from_amplitudes([psi, psi]))
        assert fd.m_fam == fd.per_state_dims[0] == 8

    def test_identical_states_in_closed_subspace(self):
        H = np.diag([1.0, 1.0, 2.0, 3.0, 4.0])
        psi = np.array([1.0, 1.0, 1.0, 0.0, 0.0])
        fd = family_decompose(H, StateFamily.from_amplitudes([psi, 2.0 * psi]))
        assert fd.m_fam == 2

    def test_single_state_keeps_jacobi_spectrum(self, rng):
        H = random_hermitian(rng, 7)
        psi = random_state(rng, 7)
        fd = family_decompose(H, StateFamily.from_amplitudes([psi]))
        K = lanczos_decompose(H, psi)
        expected, _ = eig_tridiagonal(K.jacobi)
        np.testing.assert_allclose(np.linalg.eigvalsh(fd.compressed), expected, atol=1e-9)

    def test_structure(self, rng):
        H = random_hermitian(rng, 10)
        fam = StateFamily.from_amplitudes([random_state(rng, 10) for _ in range(3)])
        fd = family_decompose(H, fam)
        assert fd.m_fam <= min(sum(fd.per_state_dims), 10)
        assert np.abs(fd.compressed - fd.compressed.conj().T).max() <= 1e-12
        gram = fd.basis.conj().T @ fd.basis
        assert np.abs(gram - np.eye(fd.m_fam)).max() <= 1e-12
        assert span_residual(fd) <= 1e-9

    def test_powers_stay_in_joint_span(self):
        H = np.diag([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
        members = [np.r_[np.ones(3), np.zeros(5)], np.r_[np.zeros(4), np.ones(4)]]
        fd = family_decompose(H, StateFamily.from_amplitudes(members))
        V = fd.basis
        for psi, m_j in zip(members, fd.per_state_dims):
            v = psi / np.linalg.norm(psi)
            for _ in range(m_j):
                residual = np.linalg.norm(v - V @ (V.conj().T @ v))
                assert residual <= 1e-9 * max(1.0, np.linalg.norm(v))
                v = H @ v

    def test_adding_a_state_never_shrinks(self):
        H = np.diag(np.arange(12.0))
        states = [np.r_[np.zeros(k), np.ones(3), np.zeros(9 - k)] for k in (0, 3, 6, 2)]
        sizes = [
            family_decompose(H, StateFamily.from_amplitudes(states[: j + 1])).m_fam
            for j in range(len(states))
        ]
        assert sizes == sorted(sizes)
        assert sizes[-1] == 9

    def test_dimension_mismatch(self, disjoint_family):
        _, fam = disjoint_family
        with pytest.raises(DimensionMismatch):
            family_decompose(np.eye(3), fam)


class TestFamilyQueryComplexity:
    @pytest.mark.parametrize("criterion", CRITERIA)
    def test_generic_function_on_disjoint_supports(self, disjoint_family, criterion):
        H, fam = disjoint_family
        f = TargetFunction.random_tabulated(11)
        assert family_query_complexity(H, fam, f, 0.0, criterion) == 3

    @pytest.mark.parametrize("criterion", CRITERIA)
    def test_square_on_sign_supports(self, criterion):
        H = np.diag([-1.0, 1.0, 1.0, -1.0])
        fam = StateFamily.from_amplitudes([[SQRT_HALF, SQRT_HALF, 0, 0], [0, 0, 0.6, 0.8]])
        assert family_query_complexity(H, fam, TargetFunction.monomial(2), 0.0, criterion) == 0

    @pytest.mark.parametrize("criterion", CRITERIA)
    def test_single_state_matches_duality(self, rng, criterion):
        H = random_hermitian(rng, 9)
        psi = random_state(rng, 9)
        f = TargetFunction.gaussian_filter(0.0, 1.0)
        expected = solve_duality(H, psi, f, 1e-4, worst_case=False).report.n_mu
        fam = StateFamily.from_amplitudes([psi])
        assert family_query_complexity(H, fam, f, 1e-4, criterion) == expected

    def test_max_state_degree_within_joint_dimension(self, rng):
        H = random_hermitian(rng, 10)
        fam = StateFamily.from_amplitudes([random_state(rng, 10) for _ in range(2)])
        f = TargetFunction.time_evolution(1.0)
        d = family_query_complexity(H, fam, f, 1e-3, "max_state")
        assert 0 < d <= family_decompose(H, fam).m_fam - 1

    def test_reuses_decomposition(self, disjoint_family):
        H, fam = disjoint_family
        fd = family_decompose(H, fam)
        f = TargetFunction.random_tabulated(11)
        assert family_query_complexity(H, fam, f, 0.0, decomposition=fd) == fd.m_fam - 1

    def test_unknown_criterion(self, disjoint_family):
        H, fam = disjoint_family
        with pytest.raises(ValueError):
            family_query_complexity(H, fam, TargetFunction.monomial(1), 0.0, "median")

    def test_negative_epsilon(self, disjoint_family):
        H, fam = disjoint_family
        with pytest.raises(ValueError):
            family_query_complexity(H, fam, TargetFunction.monomial(1), -1.0)
