"""Named verification suites behind the `verify` CLI subcommand.

Each suite returns a list of (check name, passed, detail) tuples; the
acceptance tests drive the same functions, so the command line and the
test suite agree on what "verified" means.
"""
from __future__ import annotations

import math

import numpy as np

from . import models, oracle, tdvp
from .lindblad import build_tfim
from .models import NetworkAghdo, from_classical, from_dense, maximally_mixed
from .network import NetworkSpec, log_rho_with_grad, param_count
from .sampling import full_summation_batch, sample_diagonal, sample_joint_alpha
from .spins import all_configs, config_index

Check = tuple[str, bool, str]


def _random_psd(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a @ a.conj().T


def suite_schur(rng: np.random.Generator | None = None) -> list[Check]:
    """Hadamard products of random PSD pairs stay PSD; so do truncated
    nonnegative-coefficient series applied element-wise."""
    rng = rng or np.random.default_rng(2024)
    checks: list[Check] = []
    worst = np.inf
    n_pass = 0
    for _ in range(500):
        n = int(rng.integers(2, 9))
        min_eig = float(np.linalg.eigvalsh(_random_psd(rng, n) * _random_psd(rng, n)).min())
        worst = min(worst, min_eig)
        n_pass += min_eig >= -1e-10
    checks.append(("hadamard_psd_500", n_pass == 500, f"{n_pass}/500 pass, worst eigenvalue {worst:.2e}"))

    coeffs = 1.0 / np.array([math.factorial(k) for k in range(31)], dtype=float)
    worst = np.inf
    n_pass = 0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        a = _random_psd(rng, n)
        a = a / np.max(np.abs(a)) * rng.uniform(0.3, 0.99)
        b = oracle.positive_series_apply(coeffs, a, radius=np.inf)
        min_eig = float(np.linalg.eigvalsh(b).min())
        worst = min(worst, min_eig)
        n_pass += min_eig >= -1e-9
    checks.append(("exp_series_psd_100", n_pass == 100, f"{n_pass}/100 pass, worst eigenvalue {worst:.2e}"))
    return checks


def suite_positivity(rng: np.random.Generator | None = None) -> list[Check]:
    """Dense reconstructions of random network models are physical states."""
    rng = rng or np.random.default_rng(77)
    n_pass, worst_eig, worst_tr, worst_herm = 0, np.inf, 0.0, 0.0
    total = 100
    for k in range(total):
        spec = NetworkSpec(
            sites=int(rng.integers(1, 5)),
            local_rank=int(rng.choice([1, 2, 4])),
            feature_densities=(int(rng.integers(2, 6)),),
            init_width=float(rng.uniform(1e-3, 1e-1)),
            seed=int(rng.integers(0, 2**31)),
        )
        rho = oracle.dense_from_model(NetworkAghdo.random(spec))
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        tr = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
        min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        worst_eig = min(worst_eig, min_eig)
        worst_tr = max(worst_tr, tr)
        worst_herm = max(worst_herm, herm)
        n_pass += (herm <= 1e-12) and (tr <= 1e-10) and (min_eig >= -1e-10)
    detail = f"{n_pass}/{total}, worst: eig {worst_eig:.2e}, trace dev {worst_tr:.2e}, herm {worst_herm:.2e}"
    return [("aghdo_dense_physicality_100", n_pass == total, detail)]


def suite_constructors(rng: np.random.Generator | None = None) -> list[Check]:
    """Exactness of the classical, dense and maximally mixed constructors."""
    rng = rng or np.random.default_rng(9)
    checks: list[Check] = []

    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 5))
        p = rng.random(2**n)
        p /= p.sum()
        err = float(np.max(np.abs(oracle.dense_from_model(from_classical(p)) - np.diag(p))))
        worst = max(worst, err)
    checks.append(("from_classical_50", worst <= 1e-12, f"max reconstruction error {worst:.2e}"))

    worst = 0.0
    for _ in range(20):
        n = int(rng.choice([2, 3]))
        a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        err = float(np.max(np.abs(oracle.dense_from_model(from_dense(rho)) - rho)))
        worst = max(worst, err)
    checks.append(("from_dense_20", worst <= 1e-10, f"max reconstruction error {worst:.2e}"))

    worst = 0.0
    for n in (1, 2, 3, 4):
        err = float(np.max(np.abs(oracle.dense_from_model(maximally_mixed(n)) - np.eye(2**n) / 2**n)))
        worst = max(worst, err)
    checks.append(("maximally_mixed", worst <= 1e-14, f"max reconstruction error {worst:.2e}"))
    return checks


def _tv_distance(counts: np.ndarray, probs: np.ndarray, n: int) -> float:
    return 0.5 * float(np.abs(counts / n - probs).sum())


def suite_sampler(rng: np.random.Generator | None = None, n_samples: int = 10**5) -> list[Check]:
    """Sampled distributions match exact enumeration; weights respect the bound."""
    rng = rng or np.random.default_rng(31)
    checks: list[Check] = []

    spec = NetworkSpec(sites=3, local_rank=2, feature_densities=(4,), init_width=0.05, seed=21)
    model = NetworkAghdo.random(spec)
    exact = np.real(np.diag(oracle.dense_from_model(model)))
    configs = sample_diagonal(model, n_samples, rng)
    counts = np.bincount(config_index(configs), minlength=8)
    tv = _tv_distance(counts, exact, n_samples)
    checks.append(("diagonal_tv_n3", tv <= 0.01, f"TV distance {tv:.4f} at {n_samples} samples"))

    spec2 = NetworkSpec(sites=2, local_rank=2, feature_densities=(4,), init_width=0.05, seed=22)
    model2 = NetworkAghdo.random(spec2)
    p_diag = np.real(np.diag(oracle.dense_from_model(model2)))
    cfg = all_configs(2)
    for alpha in (0.0, 0.5, 1.0):
        batch = sample_joint_alpha(model2, alpha, n_samples, rng)
        joint = np.zeros((4, 4))
        np.add.at(joint, (config_index(batch.sigma), config_index(batch.eta)), 1.0)
        exact_joint = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                prob = p_diag[i]
                for h in range(2):
                    ph = models.conditionals(model2, cfg[j][:h])[(cfg[j][h] + 1) // 2]
                    prob *= alpha * ph + (1 - alpha) * (cfg[i][h] == cfg[j][h])
                exact_joint[i, j] = prob
        tv = 0.5 * float(np.abs(joint / n_samples - exact_joint).sum())
        bound = (1.0 / alpha**2 if alpha > 0 else np.inf) * (1 + 1e-9)
        w_ok = bool(np.all(batch.weight <= bound))
        checks.append((f"joint_tv_alpha_{alpha}", tv <= 0.01 and w_ok,
                       f"TV {tv:.4f}, max weight {batch.weight.max():.3f} (bound {bound:.3f})"))
    return checks


def suite_gradient(rng: np.random.Generator | None = None) -> list[Check]:
    """Reverse-mode log-derivatives against central finite differences."""
    rng = rng or np.random.default_rng(101)
    worst = 0.0
    n_pass = 0
    total = 20
    for _ in range(total):
        n = int(rng.integers(2, 5))
        spec = NetworkSpec(
            sites=n,
            local_rank=int(rng.choice([1, 2, 4])),
            feature_densities=(int(rng.integers(2, 5)),),
            init_width=0.05,
            seed=int(rng.integers(0, 2**31)),
        )
        params = NetworkAghdo.random(spec).params
        sigma = rng.choice([-1, 1], size=(1, n)).astype(np.int8)
        eta = rng.choice([-1, 1], size=(1, n)).astype(np.int8)
        _, grads = log_rho_with_grad(spec, params, sigma, eta)
        step = 1e-5
        rel = 0.0
        for k in rng.choice(param_count(spec), size=25, replace=False):
            plus, minus = params.copy(), params.copy()
            plus[k] += step
            minus[k] -= step
            fd = (
                models.log_rho_pairs(NetworkAghdo(spec, plus), sigma, eta)[0]
                - models.log_rho_pairs(NetworkAghdo(spec, minus), sigma, eta)[0]
            ) / (2 * step)
            scale = max(abs(fd), 1e-6)
            rel = max(rel, abs(fd - grads[0, k]) / scale)
        worst = max(worst, rel)
        n_pass += rel <= 1e-6
    return [("finite_difference_20", n_pass == total, f"{n_pass}/{total}, worst relative error {worst:.2e}")]


def suite_tdvp_fixedpoint() -> list[Check]:
    """The force vanishes at an exactly represented steady state."""
    lind = build_tfim(2, 2.0, 2.0, 1.0, periodic=False)
    model = from_dense(oracle.steady_state_dense(lind))
    _, force = tdvp.estimate_S_F(model, lind, full_summation_batch(model))
    f_inf = float(np.max(np.abs(force)))
    return [("force_at_steady_state_n2", f_inf <= 1e-6, f"||F||_inf = {f_inf:.2e}")]


SUITES = {
    "schur": suite_schur,
    "positivity": suite_positivity,
    "constructors": suite_constructors,
    "sampler": suite_sampler,
    "gradient": suite_gradient,
    "tdvp-fixedpoint": suite_tdvp_fixedpoint,
}
