"""Model evaluation, constructors, and their exactness guarantees."""
import numpy as np
import pytest

from ghdo import oracle
from ghdo.errors import DegenerateAmplitudeError, InputError
from ghdo.models import (
    NetworkAghdo,
    TabulatedGhdo,
    aghdo_element,
    aghdo_log_element,
    conditionals,
    diagonal,
    from_classical,
    from_dense,
    ghdo_element,
    log_rho_pairs,
    maximally_mixed,
    random_tabulated,
)
from ghdo.network import NetworkSpec
from ghdo.spins import all_configs


def random_psd_unit_trace(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


class TestMaximallyMixed:
    def test_n1(self):
        rho = oracle.dense_from_model(maximally_mixed(1))
        np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-15)

    def test_n2(self):
        rho = oracle.dense_from_model(maximally_mixed(2))
        np.testing.assert_allclose(rho, np.eye(4) / 4, atol=1e-15)

    def test_n3_dense(self):
        rho = oracle.dense_from_model(maximally_mixed(3))
        assert np.max(np.abs(rho - np.eye(8) / 8)) <= 1e-15

    def test_elements(self):
        model = maximally_mixed(3)
        cfg = all_configs(3)
        assert ghdo_element(model, cfg[5], cfg[5]) == pytest.approx(1 / 8)
        assert ghdo_element(model, cfg[5], cfg[2]) == 0


class TestGhdoElement:
    def test_rank_one_is_pure(self, rng):
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        model = TabulatedGhdo(2, [c[:, None]])
        cfg = all_configs(2)
        for i in range(4):
            for j in range(4):
                assert ghdo_element(model, cfg[i], cfg[j]) == pytest.approx(c[i] * np.conj(c[j]))
        rho = oracle.dense_from_model(model)
        np.testing.assert_allclose(rho @ rho, np.trace(rho) * rho, atol=1e-12)

    def test_matches_dense_gram_hadamard_oracle(self, rng):
        factors = [rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)) for _ in range(2)]
        model = TabulatedGhdo(2, factors)
        expected = np.ones((4, 4), dtype=complex)
        for f in factors:
            expected *= f @ f.conj().T  # independent dense Gram/Hadamard product
        cfg = all_configs(2)
        for i in range(4):
            for j in range(4):
                assert abs(ghdo_element(model, cfg[i], cfg[j]) - expected[i, j]) <= 1e-12

    def test_rank_bound(self, rng):
        model = random_tabulated(3, 2, rng)  # K = N factors of rank 2
        rho = oracle.dense_from_model(model)
        sv = np.linalg.svd(rho, compute_uv=False)
        assert np.sum(sv > 1e-10) <= 2**3


class TestAghdoElement:
    def test_rank1_model_is_projector(self, rng):
        model = random_tabulated(3, 1, rng)
        rho = oracle.dense_from_model(model)
        np.testing.assert_allclose(rho @ rho, rho, atol=1e-12)

    def test_diagonal_is_conditional_product(self, rng):
        model = random_tabulated(3, 2, rng)
        for sigma in all_configs(3):
            d = diagonal(model, sigma)
            assert d >= 0
            assert d == pytest.approx(aghdo_element(model, sigma, sigma).real, abs=1e-12)
            assert abs(aghdo_element(model, sigma, sigma).imag) <= 1e-14

    def test_hermiticity(self, rng):
        model = random_tabulated(3, 2, rng)
        cfg = all_configs(3)
        for _ in range(20):
            i, j = rng.integers(0, 8, size=2)
            assert aghdo_element(model, cfg[i], cfg[j]) == pytest.approx(
                np.conj(aghdo_element(model, cfg[j], cfg[i]))
            )

    def test_dense_reconstruction_is_physical(self, rng):
        spec = NetworkSpec(sites=3, local_rank=2, feature_densities=(4,), init_width=0.08, seed=2)
        rho = oracle.dense_from_model(NetworkAghdo.random(spec))
        assert np.max(np.abs(rho - rho.conj().T)) <= 1e-14
        assert abs(np.trace(rho) - 1.0) <= 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-12

    def test_cauchy_schwarz(self, rng):
        model = random_tabulated(4, 2, rng)
        cfg = all_configs(4)
        for _ in range(50):
            i, j = rng.integers(0, 16, size=2)
            lhs = abs(aghdo_element(model, cfg[i], cfg[j])) ** 2
            rhs = diagonal(model, cfg[i]) * diagonal(model, cfg[j])
            assert lhs <= rhs * (1 + 1e-9)

    def test_log_element_raises_on_exact_zero(self):
        model = from_classical(np.array([0.5, 0.5, 0.0, 0.0]))
        cfg = all_configs(2)
        with pytest.raises(DegenerateAmplitudeError):
            aghdo_log_element(model, cfg[0], cfg[1])
        assert aghdo_element(model, cfg[0], cfg[1]) == 0


class TestConditionals:
    def test_sum_to_one(self, rng):
        model = random_tabulated(3, 2, rng)
        for prefix in ([], [1], [-1, 1]):
            pair = conditionals(model, prefix)
            assert pair.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(pair >= 0)

    def test_uniform_classical(self):
        model = from_classical(np.full(8, 1 / 8))
        for prefix in ([], [1], [-1, -1]):
            np.testing.assert_allclose(conditionals(model, prefix), [0.5, 0.5], atol=1e-14)

    def test_hand_marginalization(self):
        # states ordered (--, -+, +-, ++)
        model = from_classical(np.array([0.1, 0.2, 0.3, 0.4]))
        assert conditionals(model, [])[1] == pytest.approx(0.7)
        assert conditionals(model, [-1])[1] == pytest.approx(2 / 3)

    def test_diagonal_table_lookup(self):
        p = np.array([0.1, 0.2, 0.3, 0.4])
        model = from_classical(p)
        for idx, sigma in enumerate(all_configs(2)):
            assert diagonal(model, sigma) == pytest.approx(p[idx], abs=1e-14)


class TestFromClassical:
    def test_uniform_is_maximally_mixed(self):
        rho = oracle.dense_from_model(from_classical(np.full(8, 1 / 8)))
        np.testing.assert_allclose(rho, np.eye(8) / 8, atol=1e-14)

    def test_point_mass(self):
        p = np.zeros(8)
        p[5] = 1.0
        rho = oracle.dense_from_model(from_classical(p))
        expected = np.zeros((8, 8))
        expected[5, 5] = 1.0
        np.testing.assert_allclose(rho, expected, atol=1e-14)

    def test_random_table(self, rng):
        p = rng.random(8)
        p /= p.sum()
        rho = oracle.dense_from_model(from_classical(p))
        assert np.max(np.abs(rho - np.diag(p))) <= 1e-14

    def test_rejects_bad_tables(self):
        with pytest.raises(InputError):
            from_classical(np.array([0.5, 0.6]))
        with pytest.raises(InputError):
            from_classical(np.array([1.2, -0.2]))
        with pytest.raises(InputError):
            from_classical(np.array([0.5, 0.25, 0.25]))


class TestFromDense:
    def test_pure_basis_state(self):
        rho = np.zeros((4, 4), dtype=complex)
        rho[2, 2] = 1.0
        model = from_dense(rho)
        rec = oracle.dense_from_model(model)
        np.testing.assert_allclose(rec, rho, atol=1e-12)
        sv = np.linalg.svd(rec, compute_uv=False)
        assert np.sum(sv > 1e-10) == 1

    def test_identity(self):
        rho = np.eye(8, dtype=complex) / 8
        np.testing.assert_allclose(oracle.dense_from_model(from_dense(rho)), rho, atol=1e-12)

    def test_random_psd(self, rng):
        for _ in range(5):
            rho = random_psd_unit_trace(rng, 4)
            rec = oracle.dense_from_model(from_dense(rho))
            assert np.max(np.abs(rec - rho)) <= 1e-10

    def test_rejects_unphysical(self, rng):
        with pytest.raises(InputError):
            from_dense(np.eye(4) / 2)  # trace 2
        bad = np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex)
        with pytest.raises(InputError):
            from_dense(bad)  # negative eigenvalue
        nonherm = random_psd_unit_trace(rng, 4)
        nonherm[0, 1] += 0.1
        with pytest.raises(InputError):
            from_dense(nonherm)


def test_trace_sums_to_one(rng):
    model = random_tabulated(4, 3, rng)
    total = sum(diagonal(model, sigma) for sigma in all_configs(4))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_log_rho_pairs_matches_elements(rng):
    model = random_tabulated(3, 2, rng)
    cfg = all_configs(3)
    sigma = cfg[[0, 3, 5]]
    eta = cfg[[7, 3, 1]]
    logs = log_rho_pairs(model, sigma, eta)
    for k in range(3):
        assert np.exp(logs[k]) == pytest.approx(aghdo_element(model, sigma[k], eta[k]), abs=1e-13)
