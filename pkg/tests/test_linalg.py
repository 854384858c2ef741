import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schmidt_witness.linalg import (
    InternalConsistencyError, as_density, as_hermitian, as_pure_state, expectation, expectations,
    hermitian_eig, hermitize, ket, lambda_min, partial_trace_B, phi_plus, projector,
    random_density, random_pure_state, random_schmidt_rank_states, schmidt_decompose, schmidt_rank,
)
from schmidt_witness.witnesses import build_Wtilde, family_state


def random_hermitian(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T


class TestHermitize:
    def test_upper_triangle_is_authoritative(self):
        a = np.array([[1.0, 2 + 1j], [99.0, 3 + 5j]])
        h = hermitize(a)
        assert h[1, 0] == 2 - 1j
        assert h[1, 1] == 3.0
        assert np.array_equal(h, h.conj().T)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            hermitize(np.zeros((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hermitize(np.array([[np.nan, 0], [0, 1]]))

    def test_as_hermitian_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            as_hermitian(np.array([[0, 1], [0, 0]]))


class TestEig:
    def test_identity(self):
        w, _ = hermitian_eig(np.eye(4))
        assert np.allclose(w, 1.0)

    def test_projector_spectrum(self):
        w, _ = hermitian_eig(projector(phi_plus(3)))
        assert np.allclose(w, [0] * 8 + [1], atol=1e-12)

    def test_wtilde_min_eigenvalue(self):
        assert abs(lambda_min(build_Wtilde(4)) + 1.0) < 1e-9

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hermitian_eig(np.full((2, 2), np.inf))

    @pytest.mark.parametrize("n", [1, 5, 16, 49, 121])
    def test_round_trip(self, n, rng):
        a = random_hermitian(n, rng)
        w, v = hermitian_eig(a)
        assert np.all(np.diff(w) >= 0)
        err = np.linalg.norm(a - (v * w) @ v.conj().T)
        assert err <= 1e-9 * np.linalg.norm(a)
        assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-10)


class TestSchmidt:
    def test_phi_plus(self):
        sd = schmidt_decompose(phi_plus(4))
        assert np.allclose(sd.coefficients, 0.5)
        assert sd.rank == 4

    def test_product(self):
        sd = schmidt_decompose(ket(3, 0, 0))
        assert np.allclose(sd.coefficients, [1.0])
        assert sd.rank == 1

    def test_family_state(self):
        sd = schmidt_decompose(family_state(0.6, 2, 4))
        assert np.allclose(sd.coefficients, [0.8, 0.6])

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            as_pure_state(np.ones(4))

    @given(st.integers(2, 6), st.integers(0, 10 ** 6))
    def test_invariants(self, d, seed):
        psi = random_pure_state(d, seed)
        sd = schmidt_decompose(psi)
        c = sd.coefficients
        assert np.all(np.diff(c) <= 1e-15)
        assert abs(np.sum(c ** 2) - 1) < 1e-10
        assert np.allclose(sd.basis_A.conj().T @ sd.basis_A, np.eye(len(c)), atol=1e-10)
        assert np.allclose(sd.basis_B.conj().T @ sd.basis_B, np.eye(len(c)), atol=1e-10)
        assert np.linalg.norm(psi - sd.reconstruct()) < 1e-8
        # independent route: eigenvalues of the reduced state
        M = psi.reshape(d, d)
        gram = np.sort(np.linalg.eigvalsh(M @ M.conj().T))[::-1]
        assert np.allclose(c ** 2, gram[: len(c)], atol=1e-10)

    def test_rank_of_random_rank_k_states(self):
        for k in range(1, 5):
            for psi in random_schmidt_rank_states(4, k, 20, seed=k):
                assert schmidt_rank(psi) <= k


class TestPartialTrace:
    def test_phi_plus(self):
        assert np.allclose(partial_trace_B(projector(phi_plus(3)), 3), np.eye(3) / 3)

    def test_product(self):
        assert np.allclose(partial_trace_B(projector(ket(3, 0, 0)), 3), np.diag([1, 0, 0]))

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            partial_trace_B(np.eye(8), 3)

    def test_trace_preserved(self):
        for s in range(100):
            rho = random_density(3, seed=s)
            assert abs(np.trace(partial_trace_B(rho, 3)) - 1) < 1e-12

    def test_local_product(self, rng):
        A = random_hermitian(3, rng)
        B = random_hermitian(3, rng)
        assert np.allclose(partial_trace_B(np.kron(A, B), 3), np.trace(B) * A)


class TestExpectation:
    def test_wtilde_phi_plus(self):
        assert abs(expectation(build_Wtilde(4), phi_plus(4)) + 1) < 1e-12

    def test_identity(self):
        assert abs(expectation(np.eye(9), random_density(3, seed=0)) - 1) < 1e-12

    def test_wtilde_11(self):
        assert abs(expectation(build_Wtilde(4), ket(4, 1, 1)) + 0.5) < 1e-12

    def test_imaginary_residue_rejected(self):
        with pytest.raises(InternalConsistencyError):
            expectation(np.array([[0, 1], [0, 0]], dtype=complex), np.array([1, 1j]) / np.sqrt(2))

    def test_linear_in_operator(self, rng):
        A, B = random_hermitian(9, rng), random_hermitian(9, rng)
        psi = random_pure_state(3, rng)
        lhs = expectation(2 * A - 3 * B, psi)
        assert abs(lhs - (2 * expectation(A, psi) - 3 * expectation(B, psi))) < 1e-10

    def test_batched(self, rng):
        A = random_hermitian(16, rng)
        states = random_schmidt_rank_states(4, 2, 5, rng)
        assert np.allclose(expectations(A, states), [expectation(A, s) for s in states])


class TestRandom:
    def test_deterministic(self):
        assert np.array_equal(random_pure_state(3, seed=7), random_pure_state(3, seed=7))
        assert np.array_equal(random_density(3, seed=7), random_density(3, seed=7))

    def test_norms_and_purity(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            psi = random_pure_state(3, rng)
            assert abs(np.linalg.norm(psi) - 1) < 1e-12
            P = projector(psi)
            assert abs(np.trace(P @ P).real - 1) < 1e-12

    def test_density_is_valid(self):
        as_density(random_density(4, seed=3))
