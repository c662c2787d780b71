"""Masked complex-valued autoregressive network for per-site amplitude blocks.

The network maps a configuration sigma to a table of unnormalized complex
amplitudes phi[h, s, a] (site h, candidate spin value s, channel a). The
first layer carries an exclusive site mask (block at site h receives input
blocks of sites < h only) and every deeper layer an inclusive mask, so the
output block at site h depends on the prefix sigma_{<h} alone. Normalizing
each site block to unit 2-norm yields the amplitudes psi whose squared
moduli are the conditional probabilities of the diagonal distribution.

Parameters are complex; the flat parameter vector stores them in the
real-split convention, interleaving real and imaginary parts, so all
linear algebra downstream runs over real parameter indices. Logarithmic
derivatives are complex per real index and are computed by a two-channel
(holomorphic / antiholomorphic) reverse-mode sweep, which handles the
non-holomorphic pieces: the split SELU activation, the per-site
normalization, and the conjugated branch of the density-matrix element.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, InputError
from .spins import as_config_batch

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

# |rho| below this is treated as an exact zero (degenerate amplitude).
UNDERFLOW_THRESHOLD = 1e-150
LOG_UNDERFLOW = np.log(UNDERFLOW_THRESHOLD)


def selu_real(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return SELU_LAMBDA * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))


def selu_real_prime(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return SELU_LAMBDA * np.where(x > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0)))


def selu_complex(z):
    """SELU applied independently to the real and imaginary part."""
    z = np.asarray(z, dtype=complex)
    out = selu_real(z.real) + 1j * selu_real(z.imag)
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of the autoregressive amplitude network.

    feature_densities lists the hidden complex features per site; the
    output layer always emits 2 * local_rank complex values per site
    (one block per candidate spin value).
    """

    sites: int
    local_rank: int
    feature_densities: tuple[int, ...]
    init_width: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "feature_densities", tuple(int(f) for f in self.feature_densities))
        if self.sites < 1:
            raise ConfigurationError(f"sites must be >= 1, got {self.sites}")
        if self.local_rank < 1:
            raise ConfigurationError(f"local_rank must be >= 1, got {self.local_rank}")
        if len(self.feature_densities) == 0:
            raise ConfigurationError("feature_densities must be non-empty")
        if any(f < 1 for f in self.feature_densities):
            raise ConfigurationError(f"feature densities must be positive, got {self.feature_densities}")
        if not (0.0 < self.init_width <= 1.0):
            raise ConfigurationError(f"init_width must lie in (0, 1], got {self.init_width}")

    @property
    def layer_features(self) -> tuple[int, ...]:
        """Per-site feature count entering/leaving each layer, input first."""
        return (1, *self.feature_densities, 2 * self.local_rank)


@lru_cache(maxsize=64)
def _layout(spec: NetworkSpec):
    """Masks, shapes and flat offsets (in complex counts) for every layer."""
    n = spec.sites
    feats = spec.layer_features
    layers = []
    offset = 0
    for ell in range(len(feats) - 1):
        f_in, f_out = feats[ell], feats[ell + 1]
        site_mask = np.tril(np.ones((n, n)), k=-1 if ell == 0 else 0)
        mask = np.kron(site_mask, np.ones((f_out, f_in)))
        w_shape = (n * f_out, n * f_in)
        w_off = offset
        offset += w_shape[0] * w_shape[1]
        b_off = offset
        offset += w_shape[0]
        layers.append((w_off, w_shape, b_off, mask))
    return layers, offset


def complex_param_count(spec: NetworkSpec) -> int:
    return _layout(spec)[1]


def param_count(spec: NetworkSpec) -> int:
    """Length of the flat real parameter vector (two entries per complex weight)."""
    return 2 * complex_param_count(spec)


def unflatten_params(spec: NetworkSpec, params: np.ndarray):
    """Split the flat real vector into per-layer complex (W, b) pairs."""
    params = np.asarray(params, dtype=float)
    if params.shape != (param_count(spec),):
        raise InputError(f"parameter vector has shape {params.shape}, expected ({param_count(spec)},)")
    cplx = params[0::2] + 1j * params[1::2]
    layers, _ = _layout(spec)
    out = []
    for w_off, w_shape, b_off, _ in layers:
        w = cplx[w_off : w_off + w_shape[0] * w_shape[1]].reshape(w_shape)
        b = cplx[b_off : b_off + w_shape[0]]
        out.append((w, b))
    return out


def flatten_params(spec: NetworkSpec, layers) -> np.ndarray:
    """Inverse of unflatten_params."""
    cplx = np.empty(complex_param_count(spec), dtype=complex)
    layout, _ = _layout(spec)
    for (w, b), (w_off, w_shape, b_off, _) in zip(layers, layout):
        cplx[w_off : w_off + w_shape[0] * w_shape[1]] = np.asarray(w, dtype=complex).ravel()
        cplx[b_off : b_off + w_shape[0]] = np.asarray(b, dtype=complex)
    flat = np.empty(2 * cplx.size, dtype=float)
    flat[0::2] = cplx.real
    flat[1::2] = cplx.imag
    return flat


def _truncated_normal(rng: np.random.Generator, size: int, width: float) -> np.ndarray:
    """Normal(0, width) with rejected redraws outside +-2 widths."""
    out = rng.normal(0.0, width, size)
    bad = np.abs(out) > 2.0 * width
    while bad.any():
        out[bad] = rng.normal(0.0, width, int(bad.sum()))
        bad = np.abs(out) > 2.0 * width
    return out


def init_params(spec: NetworkSpec, seed: int | None = None) -> np.ndarray:
    """Draw the flat real parameter vector; deterministic for a given seed."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    return _truncated_normal(rng, param_count(spec), spec.init_width)


class _ForwardCache:
    """Per-layer activations kept alive for the reverse sweep."""

    __slots__ = ("inputs", "preacts", "phi", "denom", "psi")

    def __init__(self, inputs, preacts, phi, denom, psi):
        self.inputs = inputs      # input to each layer, (B, n_in)
        self.preacts = preacts    # pre-activation of each hidden layer, (B, n_out)
        self.phi = phi            # (B, N, 2, R) unnormalized amplitudes
        self.denom = denom        # (B, N) real per-site norms
        self.psi = psi            # (B, N, 2, R) normalized amplitudes


def _forward(spec: NetworkSpec, params: np.ndarray, configs: np.ndarray, keep: bool):
    layers = unflatten_params(spec, params)
    layout, _ = _layout(spec)
    n, r = spec.sites, spec.local_rank
    x = configs.astype(complex)
    inputs, preacts = [], []
    last = len(layers) - 1
    for ell, ((w, b), (_, _, _, mask)) in enumerate(zip(layers, layout)):
        if keep:
            inputs.append(x)
        z = x @ (w * mask).T + b
        if ell == last:
            x = z
        else:
            if keep:
                preacts.append(z)
            x = selu_real(z.real) + 1j * selu_real(z.imag)
    phi = x.reshape(-1, n, 2, r)
    denom = np.sqrt(np.sum(np.abs(phi) ** 2, axis=(2, 3)))
    psi = phi / denom[:, :, None, None]
    if keep:
        return _ForwardCache(inputs, preacts, phi, denom, psi)
    return psi


def forward_amplitudes(spec: NetworkSpec, params: np.ndarray, configs) -> np.ndarray:
    """Unnormalized amplitude table phi[b, h, s, a] for a batch of configurations."""
    configs = as_config_batch(configs, spec.sites)
    cache = _forward(spec, params, configs, keep=True)
    return cache.phi


def psi_tables(spec: NetworkSpec, params: np.ndarray, configs) -> np.ndarray:
    """Normalized amplitude table psi[b, h, s, a]; site blocks have unit 2-norm."""
    configs = as_config_batch(configs, spec.sites)
    return _forward(spec, params, configs, keep=False)


def _pair_log_terms(psi_s, psi_e, sigma, eta):
    """Per-site Gram contractions G[b, h] between a sigma branch and an eta branch."""
    s_idx = ((sigma + 1) // 2).astype(np.int64)
    e_idx = ((eta + 1) // 2).astype(np.int64)
    b_idx = np.arange(psi_s.shape[0])[:, None]
    h_idx = np.arange(psi_s.shape[1])[None, :]
    amp_s = psi_s[b_idx, h_idx, s_idx]  # (B, N, R)
    amp_e = psi_e[b_idx, h_idx, e_idx]
    return np.sum(amp_s * amp_e.conj(), axis=2)  # (B, N)


def log_rho_from_tables(psi_s, psi_e, sigma, eta) -> np.ndarray:
    """Complex log of the density-matrix element from two psi tables.

    Rows whose product underflows come back as -inf + 0j; callers treat
    them as exact zeros.
    """
    g = _pair_log_terms(psi_s, psi_e, sigma, eta)
    mag = np.abs(g)
    dead = np.any(mag == 0.0, axis=1)
    with np.errstate(divide="ignore"):
        log_mag = np.sum(np.log(mag), axis=1)
    phase = np.sum(np.angle(g), axis=1)
    out = log_mag + 1j * phase
    out[dead | (log_mag < LOG_UNDERFLOW)] = complex(-np.inf, 0.0)
    return out


def _backprop(spec, params, cache, d_psi, dt_psi):
    """Two-channel reverse sweep from psi cotangents to flat parameter gradients.

    d_psi and dt_psi are the Wirtinger cotangents d(log rho)/d(psi) and
    d(log rho)/d(conj(psi)); the return value is the complex gradient with
    respect to every real parameter, (B, d).
    """
    n, r = spec.sites, spec.local_rank
    batch = d_psi.shape[0]
    layers = unflatten_params(spec, params)
    layout, n_cplx = _layout(spec)

    phi = cache.phi.reshape(batch, n, 2 * r)
    d_psi = d_psi.reshape(batch, n, 2 * r)
    dt_psi = dt_psi.reshape(batch, n, 2 * r)
    denom = cache.denom

    # psi = phi / D with D = sqrt(sum |phi|^2): couples the two channels.
    mix = np.sum(d_psi * phi, axis=2) + np.sum(dt_psi * phi.conj(), axis=2)  # (B, N)
    scale = (mix / (2.0 * denom**3))[:, :, None]
    d_phi = d_psi / denom[:, :, None] - phi.conj() * scale
    dt_phi = dt_psi / denom[:, :, None] - phi * scale

    d_z = d_phi.reshape(batch, n * 2 * r)
    dt_z = dt_phi.reshape(batch, n * 2 * r)

    grad_flat = np.empty((batch, 2 * n_cplx), dtype=complex)
    for ell in range(len(layers) - 1, -1, -1):
        w, _ = layers[ell]
        w_off, w_shape, b_off, mask = layout[ell]
        x = cache.inputs[ell]
        gw = np.einsum("bi,bj->bij", d_z, x)
        gtw = np.einsum("bi,bj->bij", dt_z, x.conj())
        gw *= mask
        gtw *= mask
        w_lo = 2 * w_off
        w_hi = w_lo + 2 * w_shape[0] * w_shape[1]
        # pairs (d/dRe, d/dIm) built contiguously, flattened into the row
        w_block = np.empty((batch, w_shape[0] * w_shape[1], 2), dtype=complex)
        w_block[:, :, 0] = (gw + gtw).reshape(batch, -1)
        np.multiply(gw, 1j, out=gw)
        np.multiply(gtw, -1j, out=gtw)
        gw += gtw
        w_block[:, :, 1] = gw.reshape(batch, -1)
        grad_flat[:, w_lo:w_hi] = w_block.reshape(batch, -1)
        b_lo = 2 * b_off
        b_block = np.empty((batch, w_shape[0], 2), dtype=complex)
        b_block[:, :, 0] = d_z + dt_z
        b_block[:, :, 1] = 1j * (d_z - dt_z)
        grad_flat[:, b_lo : b_lo + 2 * w_shape[0]] = b_block.reshape(batch, -1)
        if ell == 0:
            break
        wm = w * mask
        d_x = d_z @ wm
        dt_x = dt_z @ wm.conj()
        z_prev = cache.preacts[ell - 1]
        sp_re = selu_real_prime(z_prev.real)
        sp_im = selu_real_prime(z_prev.imag)
        avg = 0.5 * (sp_re + sp_im)
        diff = 0.5 * (sp_re - sp_im)
        d_z = avg * d_x + diff * dt_x
        dt_z = diff * d_x + avg * dt_x
    return grad_flat


def log_rho_with_grad(spec: NetworkSpec, params: np.ndarray, sigma, eta):
    """log rho(sigma, eta) and its complex gradient over real parameters.

    Returns (log_rho (B,), grads (B, d)). Rows with underflowing amplitude
    get log_rho = -inf and a zero gradient row; scalar callers turn those
    into DegenerateAmplitudeError.
    """
    sigma = as_config_batch(sigma, spec.sites)
    eta = as_config_batch(eta, spec.sites)
    if sigma.shape != eta.shape:
        raise InputError("sigma and eta batches must have matching shapes")
    batch = sigma.shape[0]
    stacked = np.concatenate([sigma, eta], axis=0)
    cache = _forward(spec, params, stacked, keep=True)
    psi_s, psi_e = cache.psi[:batch], cache.psi[batch:]

    g = _pair_log_terms(psi_s, psi_e, sigma, eta)
    log_rho = log_rho_from_tables(psi_s, psi_e, sigma, eta)
    ok = np.isfinite(log_rho.real)
    g_safe = np.where(g == 0, 1.0, g)

    n, r = spec.sites, spec.local_rank
    s_idx = ((sigma + 1) // 2).astype(np.int64)
    e_idx = ((eta + 1) // 2).astype(np.int64)
    b_idx = np.arange(batch)[:, None]
    h_idx = np.arange(n)[None, :]
    amp_s = psi_s[b_idx, h_idx, s_idx]  # (B, N, R)
    amp_e = psi_e[b_idx, h_idx, e_idx]

    # Seeds: the sigma branch enters holomorphically, the eta branch conjugated.
    d_psi = np.zeros((2 * batch, n, 2, r), dtype=complex)
    dt_psi = np.zeros_like(d_psi)
    seed_s = (amp_e.conj() / g_safe[:, :, None]) * ok[:, None, None]
    seed_e = (amp_s / g_safe[:, :, None]) * ok[:, None, None]
    d_psi[b_idx, h_idx, s_idx] = seed_s
    dt_psi[batch + b_idx, h_idx, e_idx] = seed_e

    grads = _backprop(spec, params, cache, d_psi, dt_psi)
    return log_rho, grads[:batch] + grads[batch:]
