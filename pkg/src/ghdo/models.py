"""Density-operator models and exact constructors.

Two families share one evaluation interface:

* ``NetworkAghdo`` wraps the masked autoregressive network; this is the
  variational model evolved by the TDVP driver.
* ``TabulatedAghdo`` stores the per-site amplitude tables explicitly and
  backs the exact constructors (classical states, dense density matrices),
  so every downstream estimator can be tested on states it must represent
  exactly.

Both expose ``psi_tables(configs) -> (B, N, 2, R)`` of normalized per-site
amplitudes; every matrix element, conditional probability, sampler and
local estimator in the package is built on that single primitive.
``TabulatedGhdo`` covers the non-autoregressive case of a plain product of
per-factor Gram matrices (used by the maximally mixed state and by
algebraic tests).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import network
from .errors import DegenerateAmplitudeError, InputError
from .network import NetworkSpec, log_rho_from_tables
from .spins import all_configs, as_config, as_config_batch, config_index, prefix_indices


@dataclass(frozen=True)
class NetworkAghdo:
    """Autoregressive Gram-Hadamard density operator backed by the network."""

    spec: NetworkSpec
    params: np.ndarray

    @classmethod
    def random(cls, spec: NetworkSpec) -> "NetworkAghdo":
        return cls(spec=spec, params=network.init_params(spec))

    @property
    def n_sites(self) -> int:
        return self.spec.sites

    @property
    def local_rank(self) -> int:
        return self.spec.local_rank

    @property
    def n_params(self) -> int:
        return network.param_count(self.spec)

    def with_params(self, params: np.ndarray) -> "NetworkAghdo":
        return replace(self, params=np.asarray(params, dtype=float))

    def psi_tables(self, configs) -> np.ndarray:
        return network.psi_tables(self.spec, self.params, configs)

    def log_rho_with_grad(self, sigma, eta):
        return network.log_rho_with_grad(self.spec, self.params, sigma, eta)


class TabulatedAghdo:
    """AGHDO with explicit per-site amplitude tables.

    ``tables[h]`` has shape (2**(h+1), R) and is indexed by the prefix
    integer of sigma_{<=h} (site 0 most significant). Table entries double
    as the model's parameters for gradient checks: the flat real vector
    interleaves real and imaginary parts in table order.
    """

    def __init__(self, tables):
        tables = [np.asarray(t, dtype=complex) for t in tables]
        rank = tables[0].shape[1]
        for h, t in enumerate(tables):
            if t.shape != (2 ** (h + 1), rank):
                raise InputError(f"table {h} has shape {t.shape}, expected {(2 ** (h + 1), rank)}")
        self.tables = tables
        self.n_sites = len(tables)
        self.local_rank = rank

    @property
    def n_params(self) -> int:
        return 2 * sum(t.size for t in self.tables)

    @property
    def params(self) -> np.ndarray:
        cplx = np.concatenate([t.ravel() for t in self.tables])
        flat = np.empty(2 * cplx.size)
        flat[0::2] = cplx.real
        flat[1::2] = cplx.imag
        return flat

    def with_params(self, params: np.ndarray) -> "TabulatedAghdo":
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise InputError(f"parameter vector has shape {params.shape}, expected ({self.n_params},)")
        cplx = params[0::2] + 1j * params[1::2]
        out, off = [], 0
        for t in self.tables:
            out.append(cplx[off : off + t.size].reshape(t.shape))
            off += t.size
        return TabulatedAghdo(out)

    def psi_tables(self, configs) -> np.ndarray:
        configs = as_config_batch(configs, self.n_sites)
        pref = prefix_indices(configs)
        before = np.zeros_like(pref)
        before[:, 1:] = pref[:, :-1]
        batch, n = configs.shape
        out = np.empty((batch, n, 2, self.local_rank), dtype=complex)
        for h in range(n):
            base = 2 * before[:, h]
            out[:, h, 0, :] = self.tables[h][base]
            out[:, h, 1, :] = self.tables[h][base + 1]
        return out

    def log_rho_with_grad(self, sigma, eta):
        """log rho and its complex gradient over the table-entry parameters."""
        sigma = as_config_batch(sigma, self.n_sites)
        eta = as_config_batch(eta, self.n_sites)
        batch, n = sigma.shape
        r = self.local_rank
        ps = prefix_indices(sigma)
        pe = prefix_indices(eta)
        amp_s = np.empty((batch, n, r), dtype=complex)
        amp_e = np.empty((batch, n, r), dtype=complex)
        for h in range(n):
            amp_s[:, h] = self.tables[h][ps[:, h]]
            amp_e[:, h] = self.tables[h][pe[:, h]]
        g = np.sum(amp_s * amp_e.conj(), axis=2)
        mag = np.abs(g)
        with np.errstate(divide="ignore"):
            log_mag = np.sum(np.log(np.where(mag == 0, 1.0, mag)), axis=1)
        log_mag[np.any(mag == 0, axis=1)] = -np.inf
        log_rho = np.where(log_mag < network.LOG_UNDERFLOW, -np.inf, log_mag) + 1j * np.sum(
            np.angle(g), axis=1
        )
        log_rho[~np.isfinite(log_rho.real)] = complex(-np.inf, 0.0)
        ok = np.isfinite(log_rho.real)

        g_safe = np.where(g == 0, 1.0, g)
        n_cplx = sum(t.size for t in self.tables)
        holo = np.zeros((batch, n_cplx), dtype=complex)
        anti = np.zeros((batch, n_cplx), dtype=complex)
        b_idx = np.arange(batch)[:, None, None]
        a_idx = np.arange(r)[None, None, :]
        off = 0
        for h in range(n):
            cols_s = off + ps[:, h][:, None, None] * r + a_idx
            cols_e = off + pe[:, h][:, None, None] * r + a_idx
            val_s = (amp_e[:, h].conj() / g_safe[:, h, None])[:, None, :] * ok[:, None, None]
            val_e = (amp_s[:, h] / g_safe[:, h, None])[:, None, :] * ok[:, None, None]
            holo[b_idx, cols_s] += val_s
            anti[b_idx, cols_e] += val_e
            off += self.tables[h].size
        grads = np.empty((batch, 2 * n_cplx), dtype=complex)
        grads[:, 0::2] = holo + anti
        grads[:, 1::2] = 1j * (holo - anti)
        return log_rho, grads


class TabulatedGhdo:
    """Plain Gram-Hadamard density operator with K tabulated factors.

    ``factors[k]`` has shape (2**N, R_k), row i holding the amplitudes of
    the configuration with basis index i. The represented matrix is the
    element-wise product of the factor Gram matrices.
    """

    def __init__(self, n_sites: int, factors):
        self.n_sites = n_sites
        self.factors = [np.asarray(f, dtype=complex) for f in factors]
        dim = 2**n_sites
        for k, f in enumerate(self.factors):
            if f.ndim != 2 or f.shape[0] != dim:
                raise InputError(f"factor {k} has shape {f.shape}, expected ({dim}, R)")

    @property
    def depth(self) -> int:
        return len(self.factors)


def ghdo_element(model: TabulatedGhdo, sigma, eta) -> complex:
    """Matrix element of a product-of-Gram-factors model."""
    i = config_index(as_config(sigma, model.n_sites))
    j = config_index(as_config(eta, model.n_sites))
    out = 1.0 + 0.0j
    for f in model.factors:
        out *= np.sum(f[i] * f[j].conj())
    return complex(out)


def log_rho_pairs(model, sigma, eta) -> np.ndarray:
    """Complex log rho over a batch of (sigma, eta) pairs; -inf rows are exact zeros.

    Duplicate configurations across the two sides are evaluated once.
    """
    sigma = as_config_batch(sigma, model.n_sites)
    eta = as_config_batch(eta, model.n_sites)
    if sigma.shape != eta.shape:
        raise InputError("sigma and eta batches must have matching shapes")
    batch = sigma.shape[0]
    stacked = np.concatenate([sigma, eta], axis=0)
    keys = config_index(stacked)
    _, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    psi = model.psi_tables(stacked[first])
    return log_rho_from_tables(psi[inv[:batch]], psi[inv[batch:]], sigma, eta)


def aghdo_log_element(model, sigma, eta) -> complex:
    """log rho(sigma, eta); raises DegenerateAmplitudeError on underflow."""
    out = log_rho_pairs(model, np.atleast_2d(as_config(sigma)), np.atleast_2d(as_config(eta)))[0]
    if not np.isfinite(out.real):
        raise DegenerateAmplitudeError("|rho(sigma, eta)| underflowed the 1e-150 threshold")
    return complex(out)


def aghdo_element(model, sigma, eta) -> complex:
    """rho(sigma, eta); exact zeros come back as 0 rather than raising."""
    out = log_rho_pairs(model, np.atleast_2d(as_config(sigma)), np.atleast_2d(as_config(eta)))[0]
    if not np.isfinite(out.real):
        return 0.0 + 0.0j
    return complex(np.exp(out))


def conditionals_batch(model, configs, h: int) -> np.ndarray:
    """p(sigma_h = -1 | prefix), p(sigma_h = +1 | prefix) for each row; shape (B, 2)."""
    psi = model.psi_tables(configs)
    p = np.sum(np.abs(psi[:, h, :, :]) ** 2, axis=2)
    return p / np.sum(p, axis=1, keepdims=True)


def conditionals(model, prefix) -> np.ndarray:
    """Conditional distribution of the spin following the given prefix.

    Returns [p(-1 | prefix), p(+1 | prefix)].
    """
    prefix = np.asarray(prefix)
    h = prefix.shape[0] if prefix.ndim else 0
    if h >= model.n_sites:
        raise InputError(f"prefix of length {h} leaves no site to condition on (N = {model.n_sites})")
    full = np.full((1, model.n_sites), 1, dtype=np.int8)
    if h:
        full[0, :h] = as_config(prefix)
    return conditionals_batch(model, full, h)[0]


def diagonal(model, sigma) -> float:
    """<sigma| rho |sigma> as the product of conditional probabilities."""
    sigma = as_config(sigma, model.n_sites)
    psi = model.psi_tables(sigma[None, :])
    s_idx = (sigma + 1) // 2
    p = np.sum(np.abs(psi[0]) ** 2, axis=2)          # (N, 2)
    p = p / np.sum(p, axis=1, keepdims=True)
    return float(np.prod(p[np.arange(model.n_sites), s_idx]))


def log_diagonal_batch(model, configs) -> np.ndarray:
    """log <sigma|rho|sigma> per row; -inf where a conditional vanishes."""
    configs = as_config_batch(configs, model.n_sites)
    psi = model.psi_tables(configs)
    p = np.sum(np.abs(psi) ** 2, axis=3)             # (B, N, 2)
    p = p / np.sum(p, axis=2, keepdims=True)
    s_idx = ((configs + 1) // 2).astype(np.int64)
    chosen = np.take_along_axis(p, s_idx[:, :, None], axis=2)[:, :, 0]
    with np.errstate(divide="ignore"):
        return np.sum(np.log(chosen), axis=1)


def maximally_mixed(n_sites: int) -> TabulatedGhdo:
    """The state I / 2^N as a depth-N, rank-2 product of Gram factors."""
    configs = all_configs(n_sites)
    factors = []
    for h in range(n_sites):
        f = np.zeros((2**n_sites, 2), dtype=complex)
        bit = ((configs[:, h] + 1) // 2).astype(np.int64)
        f[np.arange(2**n_sites), bit] = 1.0 / np.sqrt(2.0)
        factors.append(f)
    return TabulatedGhdo(n_sites, factors)


def _conditional_tables(p: np.ndarray, n_sites: int):
    """Per-site conditional probabilities from a classical table over 2^N states.

    Returns a list where entry h has shape (2**(h+1),) holding
    p(sigma_h | sigma_{<h}) indexed by the prefix integer. Prefixes of
    zero marginal get the convention 1/2 (they are never reached).
    """
    marginals = [p.reshape(2**h, -1).sum(axis=1) for h in range(n_sites + 1)]
    conds = []
    for h in range(n_sites):
        parent = np.repeat(marginals[h], 2)
        child = marginals[h + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(parent > 0, child / np.where(parent > 0, parent, 1.0), 0.5)
        conds.append(c)
    return conds


def from_classical(p) -> TabulatedAghdo:
    """Exact rank-2 representation of a classical state diag(p)."""
    p = np.asarray(p, dtype=float)
    n_sites = int(round(np.log2(p.size)))
    if 2**n_sites != p.size:
        raise InputError(f"probability table length {p.size} is not a power of two")
    if np.any(p < -1e-12):
        raise InputError("probability table has negative entries")
    if abs(p.sum() - 1.0) > 1e-10:
        raise InputError(f"probability table sums to {p.sum()}, expected 1")
    p = np.clip(p, 0.0, None)
    conds = _conditional_tables(p, n_sites)
    tables = []
    for h in range(n_sites):
        t = np.zeros((2 ** (h + 1), 2), dtype=complex)
        idx = np.arange(2 ** (h + 1))
        t[idx, idx % 2] = np.sqrt(conds[h])
        tables.append(t)
    return TabulatedAghdo(tables)


def from_dense(rho) -> TabulatedAghdo:
    """Exact rank-2^N representation of a dense density matrix.

    Splits rho into its diagonal distribution and the coherence matrix
    rho_c(s, e) = rho(s, e) / sqrt(p(s) p(e)), Gram-decomposes the latter
    by Hermitian eigendecomposition, and stores sqrt-conditionals on all
    but the last site.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    n_sites = int(round(np.log2(dim)))
    if rho.shape != (dim, dim) or 2**n_sites != dim:
        raise InputError(f"density matrix has shape {rho.shape}, expected square power of two")
    if n_sites > 5:
        raise InputError(f"from_dense supports N <= 5, got N = {n_sites}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise InputError("density matrix is not Hermitian within 1e-10")
    if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > 1e-10:
        raise InputError(f"density matrix trace is {np.trace(rho)}, expected 1")
    rho = 0.5 * (rho + rho.conj().T)
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -1e-10:
        raise InputError(f"density matrix has eigenvalue {evals.min():.3e} < -1e-10")

    p = np.clip(np.diag(rho).real, 0.0, None)
    sq = np.sqrt(p)
    outer = sq[:, None] * sq[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        rho_c = np.where(outer > 0, rho / np.where(outer > 0, outer, 1.0), 0.0)
    lam, u = np.linalg.eigh(0.5 * (rho_c + rho_c.conj().T))
    psi_big = u * np.sqrt(np.clip(lam, 0.0, None))[None, :]

    conds = _conditional_tables(p, n_sites)
    rank = dim
    tables = []
    for h in range(n_sites - 1):
        t = np.zeros((2 ** (h + 1), rank), dtype=complex)
        t[:, 0] = np.sqrt(conds[h])
        tables.append(t)
    last = np.sqrt(conds[n_sites - 1])[:, None] * psi_big
    tables.append(last.astype(complex))
    return TabulatedAghdo(tables)


def random_tabulated(n_sites: int, local_rank: int, rng: np.random.Generator) -> TabulatedAghdo:
    """Random normalized tabulated AGHDO, handy for exact oracle tests."""
    tables = []
    for h in range(n_sites):
        raw = rng.normal(size=(2 ** (h + 1), local_rank)) + 1j * rng.normal(size=(2 ** (h + 1), local_rank))
        pair = raw.reshape(-1, 2, local_rank)
        norm = np.sqrt(np.sum(np.abs(pair) ** 2, axis=(1, 2)))
        tables.append((pair / norm[:, None, None]).reshape(-1, local_rank))
    return TabulatedAghdo(tables)
