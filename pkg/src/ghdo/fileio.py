"""Portable file formats: checkpoints, dense matrices, operator lists.

Checkpoints are JSON documents with version field "ghdo-ckpt-1". Network
checkpoints carry the architecture and the flat parameter vector split
into real and imaginary arrays; tabulated models store their per-site
amplitude tables the same way, so exactly constructed states can round-trip
through the estimation commands.

Dense matrices use a small text format: a header line
"ghdo-mat-1 <rows> <cols>" followed by one row per line, each complex
entry written as a re/im pair, row-major.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import CheckpointError, InputError
from .lindblad import LindbladModel, LocalOperator
from .models import NetworkAghdo, TabulatedAghdo
from .network import NetworkSpec

CHECKPOINT_VERSION = "ghdo-ckpt-1"
MATRIX_HEADER = "ghdo-mat-1"


def save_checkpoint(path, model, rng_seed: int = 0) -> None:
    """Write a model checkpoint; the rng seed records how to continue a run."""
    if isinstance(model, NetworkAghdo):
        doc = {
            "version": CHECKPOINT_VERSION,
            "kind": "network",
            "spec": {
                "sites": model.spec.sites,
                "local_rank": model.spec.local_rank,
                "feature_densities": list(model.spec.feature_densities),
                "init_width": model.spec.init_width,
                "seed": model.spec.seed,
            },
            "params_re": model.params[0::2].tolist(),
            "params_im": model.params[1::2].tolist(),
            "rng_seed": int(rng_seed),
        }
    elif isinstance(model, TabulatedAghdo):
        doc = {
            "version": CHECKPOINT_VERSION,
            "kind": "tabulated",
            "sites": model.n_sites,
            "local_rank": model.local_rank,
            "tables_re": [t.real.tolist() for t in model.tables],
            "tables_im": [t.imag.tolist() for t in model.tables],
            "rng_seed": int(rng_seed),
        }
    else:
        raise CheckpointError(f"cannot checkpoint a {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    """Read a checkpoint back; returns (model, rng_seed)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {version!r}, expected {CHECKPOINT_VERSION!r}")
    kind = doc.get("kind", "network")
    if kind == "network":
        spec = NetworkSpec(
            sites=int(doc["spec"]["sites"]),
            local_rank=int(doc["spec"]["local_rank"]),
            feature_densities=tuple(doc["spec"]["feature_densities"]),
            init_width=float(doc["spec"]["init_width"]),
            seed=int(doc["spec"]["seed"]),
        )
        re = np.asarray(doc["params_re"], dtype=float)
        im = np.asarray(doc["params_im"], dtype=float)
        params = np.empty(2 * re.size)
        params[0::2] = re
        params[1::2] = im
        model = NetworkAghdo(spec, params)
        if model.n_params != params.size:
            raise CheckpointError(
                f"checkpoint carries {params.size} parameters, architecture needs {model.n_params}"
            )
    elif kind == "tabulated":
        tables = [
            np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
            for re, im in zip(doc["tables_re"], doc["tables_im"])
        ]
        model = TabulatedAghdo(tables)
    else:
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    return model, int(doc.get("rng_seed", 0))


def write_dense_matrix(path, mat) -> None:
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2:
        raise InputError(f"matrix must be 2-dimensional, got shape {mat.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MATRIX_HEADER} {mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            fh.write(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) + "\n")


def read_dense_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != MATRIX_HEADER:
            raise InputError(f"{path} does not start with a '{MATRIX_HEADER} rows cols' header")
        rows, cols = int(header[1]), int(header[2])
        out = np.empty((rows, cols), dtype=complex)
        for i in range(rows):
            vals = np.array(fh.readline().split(), dtype=float)
            if vals.size != 2 * cols:
                raise InputError(f"{path} row {i} has {vals.size} numbers, expected {2 * cols}")
            out[i] = vals[0::2] + 1j * vals[1::2]
    return out


def _operator_from_entry(entry: dict) -> LocalOperator:
    support = tuple(int(s) for s in entry["support"])
    re = np.asarray(entry["matrix_re"], dtype=float)
    im = np.asarray(entry.get("matrix_im", np.zeros_like(re)), dtype=float)
    return LocalOperator(support, re + 1j * im)


def load_lindblad(path) -> LindbladModel:
    """Custom model file: JSON with sites, hamiltonian and jump entries."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        sites = int(doc["sites"])
        terms = [_operator_from_entry(e) for e in doc.get("hamiltonian", [])]
        jumps = [_operator_from_entry(e) for e in doc.get("jumps", [])]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed operator file {path}: {exc}") from exc
    return LindbladModel(sites, terms, jumps)
