import logging

import numpy as np
import pytest

from schmidt_witness.linalg import phi_plus, projector, random_density
from schmidt_witness.noise import noisy_state
from schmidt_witness.temporal import (
    HALF, MeasurementSetting, diagonal_setting, evaluate_from_measurements, plan_count_formula,
    plan_forged, plan_standard, reconstruct_Ciijj, simulate_A,
)
from schmidt_witness.witnesses import build_Wtilde, standard_witness


def C_elem(rho, d, i, j, k, l):
    return rho[i * d + j, k * d + l]


def projector_oracle(rho, s: MeasurementSetting):
    # for m != n and p != q the functional is the population of a product state
    d = int(round(np.sqrt(rho.shape[0])))
    a = np.zeros(d, complex)
    b = np.zeros(d, complex)
    a[s.m] += s.c_A
    a[s.n] += s.s_A * np.exp(1j * s.phi_A)
    b[s.p] += s.c_B
    b[s.q] += s.s_B * np.exp(1j * s.phi_B)
    chi = np.kron(a, b)
    return float(np.real(chi.conj() @ rho @ chi))


class TestSimulate:
    def test_cA_one(self, rng):
        rho = random_density(3, rng)
        for phi in (0.0, 1.0, 4.0):
            # only the B-side cross term survives
            s = MeasurementSetting(0, 2, 1, 2, 1.0, 0.6, phi, 2 * phi)
            expect = (0.36 * C_elem(rho, 3, 0, 1, 0, 1) + 0.64 * C_elem(rho, 3, 0, 2, 0, 2)
                      + 2 * np.exp(2j * phi) * 0.6 * 0.8 * C_elem(rho, 3, 0, 1, 0, 2))
            assert abs(simulate_A(rho, s) - expect.real) < 1e-12
            for cB in (0.0, 1.0):
                s = MeasurementSetting(0, 2, 1, 2, 1.0, cB, phi, phi)
                expect = cB ** 2 * C_elem(rho, 3, 0, 1, 0, 1) + (1 - cB ** 2) * C_elem(rho, 3, 0, 2, 0, 2)
                assert abs(simulate_A(rho, s) - expect.real) < 1e-12

    def test_phi_plus_example(self):
        rho = projector(phi_plus(4))
        s = MeasurementSetting(0, 1, 1, 0, HALF, HALF, 0.0, 0.0)
        assert abs(simulate_A(rho, s) - 0.25) < 1e-12

    def test_linear(self, rng):
        r1, r2 = random_density(3, rng), random_density(3, rng)
        s = MeasurementSetting(0, 1, 2, 0, 0.3, 0.8, 0.7, 2.1)
        a = 0.35
        lhs = simulate_A(a * r1 + (1 - a) * r2, s)
        assert abs(lhs - a * simulate_A(r1, s) - (1 - a) * simulate_A(r2, s)) < 1e-12

    def test_projector_oracle(self, rng):
        for _ in range(50):
            d = int(rng.integers(2, 5))
            rho = random_density(d, rng)
            m, n = rng.choice(d, 2, replace=False)
            p, q = rng.choice(d, 2, replace=False)
            s = MeasurementSetting(int(m), int(n), int(p), int(q), *rng.uniform(0, 1, 2),
                                   *rng.uniform(0, 2 * np.pi, 2))
            assert abs(simulate_A(rho, s) - projector_oracle(rho, s)) < 1e-12

    def test_diagonal(self, rng):
        rho = random_density(3, rng)
        assert abs(simulate_A(rho, diagonal_setting(1, 2)) - C_elem(rho, 3, 1, 2, 1, 2).real) < 1e-12

    def test_index_range(self):
        with pytest.raises(ValueError):
            simulate_A(np.eye(4) / 4, MeasurementSetting(0, 2, 0, 1, 1.0, 1.0))

    def test_setting_validation(self):
        with pytest.raises(ValueError):
            MeasurementSetting(0, 1, 0, 1, 1.2, 0.5)
        with pytest.raises(ValueError):
            MeasurementSetting(-1, 1, 0, 1, 1.0, 0.5)
        assert MeasurementSetting(0, 1, 0, 1, 1, 1, 5 * np.pi / 2).phi_A == pytest.approx(np.pi / 2)


class TestReconstruct:
    def test_phi_plus(self):
        assert abs(reconstruct_Ciijj(projector(phi_plus(4)), 0, 1) - 0.25) < 1e-12

    def test_random_states(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            d = int(rng.integers(2, 6))
            rho = random_density(d, rng, n_mix=3)
            for i in range(d):
                for j in range(d):
                    if i != j:
                        got = reconstruct_Ciijj(rho, i, j)
                        assert abs(got - C_elem(rho, d, i, i, j, j)) < 1e-12

    def test_real_state(self):
        rho = noisy_state(3, 0.3)
        assert abs(reconstruct_Ciijj(rho, 0, 2).imag) < 1e-12

    def test_equal_indices(self):
        with pytest.raises(ValueError):
            reconstruct_Ciijj(np.eye(9) / 9, 1, 1)


class TestPlans:
    def test_counts(self):
        assert plan_standard(4).count == 28
        assert plan_forged(4).count == 16
        assert plan_forged(11).count == 51
        for d in range(2, 13):
            assert plan_standard(d).count == 2 * d * d - d == plan_count_formula(d, "standard")
        for d in range(4, 13):
            assert plan_forged(d).count == 5 * d - 4 == plan_count_formula(d, "forged")

    def test_distinct_count(self):
        assert plan_forged(5).distinct_count <= plan_forged(5).count
        assert plan_standard(5).distinct_count <= plan_standard(5).count

    def test_forged_refuses_small_d(self):
        with pytest.raises(ValueError, match="d = 3"):
            plan_forged(3)
        with pytest.raises(ValueError):
            plan_forged(2)

    def test_coverage(self):
        diag, re = plan_forged(5).covered()
        assert diag == {(i, i) for i in range(5)}
        assert re == {(0, i) for i in range(1, 5)}

    def test_csv(self, tmp_path):
        path = tmp_path / "plan.csv"
        text = plan_forged(4).to_csv(path)
        lines = text.strip().split("\n")
        assert lines[0] == "m,n,p,q,cA,cB,phiA,phiB,purpose"
        assert len(lines) == 17
        assert path.read_text() == text

    def test_hardware_warning(self, caplog):
        from schmidt_witness import temporal
        temporal._warned.clear()
        with caplog.at_level(logging.WARNING):
            plan_standard(3)
            plan_standard(4)
        assert sum("hardware" in r.message for r in caplog.records) == 1


class TestEvaluate:
    def test_wtilde_phi_plus(self):
        v = evaluate_from_measurements(projector(phi_plus(4)), build_Wtilde(4), plan_forged(4))
        assert abs(v + 1) < 1e-10

    def test_standard_noisy(self):
        rho = noisy_state(4, 0.1)
        W = standard_witness(4, 2)
        v = evaluate_from_measurements(rho, W, plan_standard(4))
        assert abs(v - np.trace(W @ rho).real) < 1e-10

    def test_identity(self):
        v = evaluate_from_measurements(np.eye(16) / 16, build_Wtilde(4), plan_forged(4))
        assert abs(v + 0.0625) < 1e-12

    def test_random(self, rng):
        for d in (4, 5, 7):
            W = build_Wtilde(d)
            for _ in range(10):
                rho = random_density(d, rng, n_mix=4)
                v = evaluate_from_measurements(rho, W, plan_forged(d))
                assert abs(v - np.trace(W @ rho).real) < 1e-10
                Ws = standard_witness(d, 2)
                v = evaluate_from_measurements(rho, Ws, plan_standard(d))
                assert abs(v - np.trace(Ws @ rho).real) < 1e-10

    def test_uncovered(self):
        with pytest.raises(ValueError, match=r"\(0, 1, 1, 0\)|not covered"):
            evaluate_from_measurements(np.eye(16) / 16, standard_witness(4, 2), plan_forged(4))

    def test_imaginary_part_rejected(self):
        W = build_Wtilde(4).astype(complex)
        W[0, 5] += 0.1j
        W[5, 0] -= 0.1j
        with pytest.raises(ValueError):
            evaluate_from_measurements(np.eye(16) / 16, W, plan_forged(4))
