"""Spin-configuration helpers.

Configurations are length-N arrays with entries in {-1, +1}. The basis
index of a configuration treats site 0 as the most significant bit with
bit = (sigma + 1) / 2, so index 0 is all-down (-1, ..., -1) and index
2^N - 1 is all-up.
"""
from __future__ import annotations

import numpy as np

from .errors import InputError


def as_config(sigma, n_sites: int | None = None) -> np.ndarray:
    """Validate and return a single configuration as an int8 array."""
    arr = np.asarray(sigma)
    if arr.ndim != 1:
        raise InputError(f"configuration must be 1-dimensional, got shape {arr.shape}")
    if n_sites is not None and arr.shape[0] != n_sites:
        raise InputError(f"configuration has length {arr.shape[0]}, expected {n_sites}")
    if arr.dtype.kind not in "iu" or not np.all(np.abs(arr) == 1):
        raise InputError("configuration entries must be -1 or +1")
    return arr if arr.dtype == np.int8 else arr.astype(np.int8)


def as_config_batch(configs, n_sites: int | None = None) -> np.ndarray:
    """Validate a (B, N) batch of configurations."""
    arr = np.asarray(configs)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InputError(f"configuration batch must be 2-dimensional, got shape {arr.shape}")
    if n_sites is not None and arr.shape[1] != n_sites:
        raise InputError(f"configurations have length {arr.shape[1]}, expected {n_sites}")
    if arr.dtype.kind not in "iu" or not np.all(np.abs(arr) == 1):
        raise InputError("configuration entries must be -1 or +1")
    return arr if arr.dtype == np.int8 else arr.astype(np.int8)


def all_configs(n_sites: int) -> np.ndarray:
    """All 2^N configurations, row i being the configuration with basis index i."""
    idx = np.arange(2**n_sites)
    shifts = n_sites - 1 - np.arange(n_sites)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def config_index(configs) -> np.ndarray:
    """Basis index of each row of a (B, N) batch."""
    arr = np.asarray(configs)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    n = arr.shape[1]
    bits = (arr + 1) // 2
    weights = 1 << (n - 1 - np.arange(n))
    idx = bits @ weights
    return int(idx[0]) if single else idx


def prefix_indices(configs: np.ndarray) -> np.ndarray:
    """Cumulative prefix index p[b, h] of sigma_{<=h}, computed per site.

    p[b, h] = 2 * p[b, h-1] + bit(sigma_h); used to address per-site
    lookup tables of autoregressive amplitudes.
    """
    bits = ((configs + 1) // 2).astype(np.int64)
    out = np.empty_like(bits)
    acc = np.zeros(bits.shape[0], dtype=np.int64)
    for h in range(bits.shape[1]):
        acc = 2 * acc + bits[:, h]
        out[:, h] = acc
    return out
