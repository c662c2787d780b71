"""Direct sampling of the diagonal and of the joint proposal distribution.

The diagonal distribution p(sigma) factors into conditionals, so exact
uncorrelated samples come from one sweep over the sites. The joint
proposal p_alpha(sigma, eta) draws sigma from p and then builds eta site
by site, copying sigma_h with probability (1 - alpha) and resampling from
the conditional otherwise; its closed-form density makes the importance
weights w = |rho(sigma, eta)|^2 / p_alpha exact, with the hard bound
w <= alpha^-N.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBatchError, InputError
from .lindblad import PAULI, LocalOperator, a_loc_batch
from .models import log_rho_pairs
from .spins import all_configs

# Conditionals are floored here before entering a log, then renormalized.
CONDITIONAL_FLOOR = 1e-12

JACKKNIFE_BLOCKS = 32


@dataclass
class SampleBatch:
    """Joint samples with their exact proposal density and weights."""

    sigma: np.ndarray       # (n, N) int8
    eta: np.ndarray         # (n, N) int8
    log_p_alpha: np.ndarray  # (n,) float
    log_rho: np.ndarray     # (n,) complex, -inf rows are exact zeros
    weight: np.ndarray      # (n,) float, |rho|^2 / p_alpha
    alpha: float

    def __len__(self) -> int:
        return self.sigma.shape[0]


@dataclass
class EstimatorResult:
    mean: complex
    std_error: float
    n_samples: int
    effective_sample_size: float


@dataclass
class PurityEstimate:
    purity: float
    purity_error: float
    renyi2: float
    renyi2_error: float
    n_samples: int


def _floored(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, CONDITIONAL_FLOOR, None)
    return p / np.sum(p, axis=1, keepdims=True)


def _site_conditionals(model, configs: np.ndarray, h: int) -> np.ndarray:
    psi = model.psi_tables(configs)
    p = np.sum(np.abs(psi[:, h, :, :]) ** 2, axis=2)
    return _floored(p)


def sample_diagonal(model, n: int, rng: np.random.Generator, return_log_p: bool = False):
    """n i.i.d. configurations from the diagonal distribution."""
    if n < 1:
        raise InputError(f"need n >= 1 samples, got {n}")
    n_sites = model.n_sites
    configs = np.ones((n, n_sites), dtype=np.int8)
    log_p = np.zeros(n)
    for h in range(n_sites):
        p = _site_conditionals(model, configs, h)
        take_up = rng.random(n) < p[:, 1]
        configs[:, h] = np.where(take_up, 1, -1).astype(np.int8)
        log_p += np.log(np.where(take_up, p[:, 1], p[:, 0]))
    if return_log_p:
        return configs, log_p
    return configs


def sample_joint_alpha(model, alpha: float, n: int, rng: np.random.Generator) -> SampleBatch:
    """Joint (sigma, eta) samples from p_alpha with exact densities and weights.

    Per site, eta copies sigma with probability 1 - alpha and otherwise
    resamples from the conditional of the partially built eta; the random
    stream is consumed in a fixed order (sigma draw, coin, eta draw) so
    runs are reproducible for every alpha.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    if n < 1:
        raise InputError(f"need n >= 1 samples, got {n}")
    n_sites = model.n_sites
    sigma = np.ones((n, n_sites), dtype=np.int8)
    eta = np.ones((n, n_sites), dtype=np.int8)
    log_p_sigma = np.zeros(n)
    log_factor_eta = np.zeros(n)
    for h in range(n_sites):
        stacked = np.concatenate([sigma, eta], axis=0)
        p = _site_conditionals(model, stacked, h)
        p_s, p_e = p[:n], p[n:]
        take_up = rng.random(n) < p_s[:, 1]
        sigma[:, h] = np.where(take_up, 1, -1).astype(np.int8)
        log_p_sigma += np.log(np.where(take_up, p_s[:, 1], p_s[:, 0]))

        resample = rng.random(n) < alpha
        eta_up = rng.random(n) < p_e[:, 1]
        eta[:, h] = np.where(resample, np.where(eta_up, 1, -1), sigma[:, h]).astype(np.int8)
        p_eta_h = np.where(eta[:, h] == 1, p_e[:, 1], p_e[:, 0])
        log_factor_eta += np.log(alpha * p_eta_h + (1.0 - alpha) * (sigma[:, h] == eta[:, h]))

    log_p_alpha = log_p_sigma + log_factor_eta
    log_rho = log_rho_pairs(model, sigma, eta)
    weight = np.zeros(n)
    ok = np.isfinite(log_rho.real)
    weight[ok] = np.exp(2.0 * log_rho.real[ok] - log_p_alpha[ok])
    return SampleBatch(sigma, eta, log_p_alpha, log_rho, weight, alpha)


def _jackknife(values: np.ndarray, weights: np.ndarray):
    """Self-normalized mean with a delete-one-block jackknife standard error."""
    total_w = weights.sum()
    total_v = (weights * values).sum()
    mean = total_v / total_w
    n = len(values)
    blocks = min(JACKKNIFE_BLOCKS, n)
    edges = np.linspace(0, n, blocks + 1).astype(int)
    partial = []
    for b in range(blocks):
        sl = slice(edges[b], edges[b + 1])
        w_out = total_w - weights[sl].sum()
        if w_out <= 0:
            continue
        partial.append((total_v - (weights[sl] * values[sl]).sum()) / w_out)
    if len(partial) < 2:
        return mean, np.inf
    partial = np.asarray(partial)
    m = len(partial)
    var = (m - 1) / m * np.sum(np.abs(partial - partial.mean()) ** 2)
    return mean, float(np.sqrt(var))


def superop_expectation(model, batch: SampleBatch, f) -> EstimatorResult:
    """Self-normalized importance-sampled average of f over |rho|^2.

    f may be a callable f(sigma_row, eta_row) -> complex or a precomputed
    array of per-sample values.
    """
    if callable(f):
        values = np.array([f(s, e) for s, e in zip(batch.sigma, batch.eta)], dtype=complex)
    else:
        values = np.asarray(f, dtype=complex)
        if values.shape != (len(batch),):
            raise InputError(f"value array has shape {values.shape}, expected ({len(batch)},)")
    weights = batch.weight
    total = weights.sum()
    if total <= 0.0:
        raise DegenerateBatchError("all importance weights vanish")
    values = np.where(weights > 0, values, 0.0)
    mean, err = _jackknife(values, weights)
    ess = float(total**2 / np.sum(weights**2))
    return EstimatorResult(complex(mean), err, len(batch), ess)


def estimate_purity_renyi2(model, alpha: float, n: int, rng: np.random.Generator,
                           batch: SampleBatch | None = None) -> PurityEstimate:
    """Tr rho^2 as the unnormalized mean weight, and S2 = -log2 of it.

    Valid because the model has unit trace, so E_{p_alpha}[w] sums
    |rho|^2 over all pairs. A pre-drawn batch can be reused.
    """
    if batch is None:
        batch = sample_joint_alpha(model, alpha, n, rng)
    w = batch.weight
    purity = float(w.mean())
    if purity <= 0.0:
        raise DegenerateBatchError("purity estimate is not positive")
    purity_err = float(w.std(ddof=1) / np.sqrt(len(w))) if len(w) > 1 else np.inf
    renyi2 = -np.log2(purity)
    renyi2_err = purity_err / (purity * np.log(2.0))
    return PurityEstimate(purity, purity_err, renyi2, renyi2_err, len(w))


def _sample_mean_result(values: np.ndarray) -> EstimatorResult:
    keep = np.isfinite(values.real)
    used = values[keep]
    if used.size == 0:
        raise DegenerateBatchError("every sample had a degenerate diagonal")
    mean = complex(used.mean())
    if used.size > 1:
        var = np.sum(np.abs(used - mean) ** 2) / (used.size - 1)
        err = float(np.sqrt(var / used.size))
    else:
        err = np.inf
    return EstimatorResult(mean, err, int(used.size), float(used.size))


def estimate_observable(model, op: LocalOperator, configs) -> EstimatorResult:
    """Mean of the local estimator of op over diagonal samples.

    Samples whose diagonal underflows are skipped and excluded from the
    count; the standard error is the plain standard error of the mean.
    """
    return _sample_mean_result(a_loc_batch(model, op, configs))


def estimate_magnetization(model, configs, axis: str) -> EstimatorResult:
    """Site-averaged Pauli expectation over diagonal samples."""
    per_site = np.stack(
        [a_loc_batch(model, LocalOperator((i,), PAULI[axis]), configs) for i in range(model.n_sites)]
    )
    return _sample_mean_result(per_site.mean(axis=0))


def magnetization_values(model, configs) -> dict[str, np.ndarray]:
    """Per-sample site-averaged x, y, z local estimators, sharing one evaluation.

    The x and y estimators need the same single-flip amplitude ratios, and
    z is read off the configurations directly, so diagnostics cost one
    batched model call per step.
    """
    configs = np.asarray(configs, dtype=np.int8)
    n, n_sites = configs.shape
    log_den = log_rho_pairs(model, configs, configs)
    flips = []
    for i in range(n_sites):
        f = configs.copy()
        f[:, i] = -f[:, i]
        flips.append(f)
    log_num = log_rho_pairs(model, np.concatenate(flips), np.tile(configs, (n_sites, 1)))
    diff = log_num - np.tile(log_den, n_sites)
    ratio = np.zeros(diff.shape, dtype=complex)
    good = np.isfinite(diff.real) & (diff.real < 700.0)
    ratio[good] = np.exp(diff[good])
    ratio = ratio.reshape(n_sites, n)
    x_vals = ratio.mean(axis=0)
    # <sigma|y_i|flip> is +i when sigma_i = -1 and -i otherwise
    amp_y = np.where(configs.T == -1, 1j, -1j)
    y_vals = (amp_y * ratio).mean(axis=0)
    z_vals = configs.mean(axis=1).astype(complex)
    return {"x": x_vals, "y": y_vals, "z": z_vals}


def full_summation_batch(model) -> SampleBatch:
    """Every (sigma, eta) pair with its exact |rho|^2 weight (small N only).

    Estimators fed this batch compute noise-free superoperator averages;
    used by fixed-point and estimator-consistency checks.
    """
    n_sites = model.n_sites
    if n_sites > 5:
        raise InputError(f"full summation supports N <= 5, got {n_sites}")
    cfg = all_configs(n_sites)
    dim = cfg.shape[0]
    sigma = np.repeat(cfg, dim, axis=0)
    eta = np.tile(cfg, (dim, 1))
    log_rho = log_rho_pairs(model, sigma, eta)
    weight = np.zeros(dim * dim)
    ok = np.isfinite(log_rho.real)
    weight[ok] = np.exp(2.0 * log_rho.real[ok])
    return SampleBatch(sigma, eta, np.zeros(dim * dim), log_rho, weight, alpha=1.0)


def dump_samples(batch: SampleBatch, path) -> None:
    """One tab-separated line per sample: sigma, eta, weight, log amplitudes."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sigma\teta\tweight\tlog_rho_re\tlog_rho_im\tlog_p_alpha\n")
        for k in range(len(batch)):
            s = " ".join(str(int(v)) for v in batch.sigma[k])
            e = " ".join(str(int(v)) for v in batch.eta[k])
            fh.write(
                f"{s}\t{e}\t{batch.weight[k]:.17g}\t{batch.log_rho[k].real:.17g}"
                f"\t{batch.log_rho[k].imag:.17g}\t{batch.log_p_alpha[k]:.17g}\n"
            )
