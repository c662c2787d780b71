"""Samplers and importance-weighted estimators against enumeration oracles."""
import numpy as np
import pytest

from ghdo import oracle
from ghdo.errors import DegenerateBatchError
from ghdo.lindblad import PAULI_X, PAULI_Z, LocalOperator
from ghdo.models import NetworkAghdo, from_classical, maximally_mixed, random_tabulated
from ghdo.network import NetworkSpec
from ghdo.sampling import (
    estimate_observable,
    estimate_purity_renyi2,
    full_summation_batch,
    sample_diagonal,
    sample_joint_alpha,
    superop_expectation,
)
from ghdo.spins import all_configs, config_index


def test_point_mass_sampling(rng):
    p = np.zeros(8)
    p[3] = 1.0
    model = from_classical(p)
    configs = sample_diagonal(model, 200, rng)
    assert np.all(config_index(configs) == 3)


def test_uniform_frequencies(rng):
    model = from_classical(np.full(4, 0.25))
    configs = sample_diagonal(model, 10**5, rng)
    freqs = np.bincount(config_index(configs), minlength=4) / 10**5
    np.testing.assert_allclose(freqs, 0.25, atol=0.01)


def test_diagonal_tv_distance(rng):
    spec = NetworkSpec(sites=3, local_rank=2, feature_densities=(4,), init_width=0.06, seed=8)
    model = NetworkAghdo.random(spec)
    exact = np.real(np.diag(oracle.dense_from_model(model)))
    counts = np.bincount(config_index(sample_diagonal(model, 10**5, rng)), minlength=8)
    tv = 0.5 * np.abs(counts / 10**5 - exact).sum()
    assert tv <= 0.01


def test_joint_alpha_zero_copies_sigma(rng, small_model):
    batch = sample_joint_alpha(small_model, 0.0, 500, rng)
    np.testing.assert_array_equal(batch.sigma, batch.eta)
    # p_0(sigma, sigma) = p(sigma), so the weight equals the diagonal
    from ghdo.models import log_diagonal_batch

    np.testing.assert_allclose(
        batch.weight, np.exp(log_diagonal_batch(small_model, batch.sigma)), rtol=1e-10
    )


def test_joint_alpha_one_independent(rng, small_model):
    n = 10**5
    batch = sample_joint_alpha(small_model, 1.0, n, rng)
    exact = np.real(np.diag(oracle.dense_from_model(small_model)))
    for side in (batch.sigma, batch.eta):
        tv = 0.5 * np.abs(np.bincount(config_index(side), minlength=8) / n - exact).sum()
        assert tv <= 0.01
    joint = np.zeros((8, 8))
    np.add.at(joint, (config_index(batch.sigma), config_index(batch.eta)), 1.0 / n)
    tv_joint = 0.5 * np.abs(joint - np.outer(exact, exact)).sum()
    assert tv_joint <= 0.02


def test_joint_alpha_half_matches_product_formula(rng):
    from ghdo.models import conditionals

    spec = NetworkSpec(sites=2, local_rank=2, feature_densities=(4,), init_width=0.06, seed=3)
    model = NetworkAghdo.random(spec)
    n = 10**5
    alpha = 0.5
    batch = sample_joint_alpha(model, alpha, n, rng)
    cfg = all_configs(2)
    p_diag = np.real(np.diag(oracle.dense_from_model(model)))
    expected = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            prob = p_diag[i]
            for h in range(2):
                ph = conditionals(model, cfg[j][:h])[(cfg[j][h] + 1) // 2]
                prob *= alpha * ph + (1 - alpha) * (cfg[i][h] == cfg[j][h])
            expected[i, j] = prob
    counts = np.zeros((4, 4))
    np.add.at(counts, (config_index(batch.sigma), config_index(batch.eta)), 1.0 / n)
    assert 0.5 * np.abs(counts - expected).sum() <= 0.01
    # exact density: log_p_alpha of each sample matches the formula
    k = rng.integers(0, n, size=50)
    np.testing.assert_allclose(
        np.exp(batch.log_p_alpha[k]),
        expected[config_index(batch.sigma[k]), config_index(batch.eta[k])],
        rtol=1e-9,
    )


def test_weight_bound(rng):
    for alpha in (0.2, 0.5, 0.8, 1.0):
        spec = NetworkSpec(sites=3, local_rank=2, feature_densities=(3,), init_width=0.08,
                           seed=int(10 * alpha))
        model = NetworkAghdo.random(spec)
        batch = sample_joint_alpha(model, alpha, 20000, rng)
        assert batch.weight.max() <= alpha ** (-3) * (1 + 1e-9)


def test_support_domination(rng):
    """Sampled pairs never carry an undefined weight: p_alpha > 0 wherever drawn,
    and rho = 0 only yields weight 0."""
    model = from_classical(np.array([0.5, 0.5, 0.0, 0.0]))
    batch = sample_joint_alpha(model, 0.5, 5000, rng)
    assert np.all(np.isfinite(batch.log_p_alpha))
    assert np.all(batch.weight >= 0)
    dead = ~np.isfinite(batch.log_rho.real)
    assert np.all(batch.weight[dead] == 0)


def test_seeded_determinism(small_model):
    a = sample_joint_alpha(small_model, 0.5, 300, np.random.default_rng(99))
    b = sample_joint_alpha(small_model, 0.5, 300, np.random.default_rng(99))
    np.testing.assert_array_equal(a.sigma, b.sigma)
    np.testing.assert_array_equal(a.eta, b.eta)
    np.testing.assert_array_equal(a.weight, b.weight)


def test_superop_expectation_constant_is_one(rng, small_model):
    batch = sample_joint_alpha(small_model, 0.5, 2000, rng)
    result = superop_expectation(small_model, batch, np.ones(len(batch)))
    assert result.mean == pytest.approx(1.0, abs=1e-12)
    assert result.effective_sample_size <= result.n_samples


def test_superop_expectation_diagonal_indicator(rng):
    """On a pure state Tr rho^2 = 1, so E_rho2[delta_{sigma,eta}] = sum_s p(s)^2."""
    spec = NetworkSpec(sites=2, local_rank=1, feature_densities=(4,), init_width=0.05, seed=12)
    pure = NetworkAghdo.random(spec)
    p_pure = np.real(np.diag(oracle.dense_from_model(pure)))
    expected = np.sum(p_pure**2)
    batch = sample_joint_alpha(pure, 0.5, 40000, rng)
    values = (config_index(batch.sigma) == config_index(batch.eta)).astype(float)
    result = superop_expectation(pure, batch, values)
    assert abs(result.mean.real - expected) <= 3 * result.std_error + 1e-3


def test_superop_expectation_matches_full_summation(rng, small_model):
    """Sampled average of a logarithmic derivative against exact enumeration."""
    batch_exact = full_summation_batch(small_model)
    _, grads = small_model.log_rho_with_grad(batch_exact.sigma, batch_exact.eta)
    k = 7
    w = batch_exact.weight / batch_exact.weight.sum()
    exact = np.sum(w * grads[:, k])

    batch = sample_joint_alpha(small_model, 0.5, 30000, rng)
    ok = batch.weight > 0
    _, grads_s = small_model.log_rho_with_grad(batch.sigma[ok], batch.eta[ok])
    values = np.zeros(len(batch), dtype=complex)
    values[ok] = grads_s[:, k]
    result = superop_expectation(small_model, batch, values)
    assert abs(result.mean - exact) <= 3 * result.std_error + 1e-3


class TestPurity:
    def test_pure_state_gives_zero_entropy(self, rng):
        spec = NetworkSpec(sites=2, local_rank=1, feature_densities=(3,), init_width=0.05, seed=4)
        model = NetworkAghdo.random(spec)
        est = estimate_purity_renyi2(model, 0.8, 30000, rng)
        assert abs(est.renyi2) <= 3 * est.renyi2_error + 0.02

    def test_maximally_mixed_gives_n(self, rng):
        n_sites = 3
        model = from_classical(np.full(2**n_sites, 2.0**-n_sites))
        est = estimate_purity_renyi2(model, 0.5, 30000, rng)
        assert abs(est.renyi2 - n_sites) <= 3 * est.renyi2_error + 0.05

    def test_matches_dense(self, rng, small_model):
        exact = float(np.sum(np.abs(oracle.dense_from_model(small_model)) ** 2))
        est = estimate_purity_renyi2(small_model, 0.5, 40000, rng)
        assert abs(est.purity - exact) <= 3 * est.purity_error

    def test_reuses_batch(self, rng, small_model):
        batch = sample_joint_alpha(small_model, 0.5, 5000, rng)
        est = estimate_purity_renyi2(small_model, 0.5, 5000, rng, batch=batch)
        assert est.purity == pytest.approx(batch.weight.mean())


class TestEstimateObservable:
    def test_identity_exact(self, rng, small_model):
        eye = LocalOperator((1,), np.eye(2, dtype=complex))
        configs = sample_diagonal(small_model, 500, rng)
        result = estimate_observable(small_model, eye, configs)
        assert result.mean == pytest.approx(1.0, abs=1e-12)
        assert result.std_error == pytest.approx(0.0, abs=1e-12)

    def test_sigma_z_on_classical(self, rng):
        p = np.array([0.1, 0.2, 0.3, 0.4])
        model = from_classical(p)
        cfg = all_configs(2)
        exact = np.sum(p * cfg[:, 0])  # E[sigma_1] under p
        configs = sample_diagonal(model, 10**5, rng)
        result = estimate_observable(model, LocalOperator((0,), PAULI_Z), configs)
        assert abs(result.mean.real - exact) <= 3 * result.std_error

    def test_sigma_x_traceless_on_mixed(self, rng):
        model = from_classical(np.full(8, 1 / 8))
        configs = sample_diagonal(model, 2000, rng)
        result = estimate_observable(model, LocalOperator((1,), PAULI_X), configs)
        assert result.mean == pytest.approx(0.0, abs=1e-12)


def test_degenerate_batch_raises(small_model):
    batch = sample_joint_alpha(small_model, 0.5, 100, np.random.default_rng(0))
    batch.weight[:] = 0.0
    with pytest.raises(DegenerateBatchError):
        superop_expectation(small_model, batch, np.ones(100))


def test_joint_marginal_alpha_one_matches_diagonal_sampler(rng, small_model):
    """The eta marginal at alpha = 1 follows the same law as sample_diagonal."""
    n = 40000
    batch = sample_joint_alpha(small_model, 1.0, n, rng)
    direct = sample_diagonal(small_model, n, rng)
    c1 = np.bincount(config_index(batch.eta), minlength=8) / n
    c2 = np.bincount(config_index(direct), minlength=8) / n
    assert 0.5 * np.abs(c1 - c2).sum() <= 0.015
