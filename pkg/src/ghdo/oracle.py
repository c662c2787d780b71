"""Dense exact-diagonalization reference for small systems.

Everything here works with full 2^N x 2^N matrices and exists to verify
the variational machinery: Liouvillian construction and steady states,
dense reconstruction of the model classes, and the algebraic facts the
ansatz rests on (Hadamard products of PSD matrices stay PSD, element-wise
positive-coefficient series stay PSD).

Vectorization uses column stacking: vec(A rho B) = (B^T kron A) vec(rho).
"""
from __future__ import annotations

import numpy as np

from .errors import CapacityError, InputError, NonUniqueSteadyStateError
from .lindblad import PAULI, LindbladModel, LocalOperator
from .models import TabulatedGhdo
from .spins import all_configs

MAX_DENSE_LIOUVILLIAN_SITES = 6
MAX_DENSE_MODEL_SITES = 8


def embed_operator(op: LocalOperator, n_sites: int) -> np.ndarray:
    """Dense 2^N x 2^N matrix of a local operator at its support."""
    k = len(op.support)
    configs = all_configs(n_sites)
    dim = 2**n_sites
    full = np.zeros((dim, dim), dtype=complex)
    bits = ((configs[:, list(op.support)] + 1) // 2).astype(np.int64)
    weights = 1 << np.arange(k - 1, -1, -1)
    loc = bits @ weights
    site_weight = np.array([1 << (n_sites - 1 - s) for s in op.support], dtype=np.int64)
    base = np.arange(dim) - bits @ site_weight
    for col in range(2**k):
        col_bits = np.array([(col >> (k - 1 - p)) & 1 for p in range(k)], dtype=np.int64)
        j = base + col_bits @ site_weight
        full[np.arange(dim), j] += op.matrix[loc, col]
    return full


def dense_hamiltonian(lind: LindbladModel) -> np.ndarray:
    dim = 2**lind.sites
    h = np.zeros((dim, dim), dtype=complex)
    for term in lind.hamiltonian_terms:
        h += embed_operator(term, lind.sites)
    return h


def dense_liouvillian(lind: LindbladModel) -> np.ndarray:
    """Matrix of the Lindblad superoperator on vec(rho), column stacking."""
    if lind.sites > MAX_DENSE_LIOUVILLIAN_SITES:
        raise CapacityError(f"dense Liouvillian supports N <= {MAX_DENSE_LIOUVILLIAN_SITES}, got {lind.sites}")
    dim = 2**lind.sites
    eye = np.eye(dim, dtype=complex)
    h = dense_hamiltonian(lind)
    liou = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for jump in lind.jump_operators:
        l_full = embed_operator(jump, lind.sites)
        ldl = l_full.conj().T @ l_full
        liou += np.kron(l_full.conj(), l_full)
        liou -= 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
    return liou


def apply_liouvillian(lind: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """L(rho) applied densely without forming the superoperator matrix."""
    h = dense_hamiltonian(lind)
    out = -1j * (h @ rho - rho @ h)
    for jump in lind.jump_operators:
        l_full = embed_operator(jump, lind.sites)
        ldl = l_full.conj().T @ l_full
        out += l_full @ rho @ l_full.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
    return out


def steady_state_dense(lind: LindbladModel, degeneracy_tol: float = 1e-10) -> np.ndarray:
    """Null vector of the dense Liouvillian as a physical density matrix.

    Takes the eigenvector of the eigenvalue nearest zero, Hermitizes,
    clips negative eigenvalues and normalizes the trace. The residual
    ||L rho|| must come out below 1e-8.
    """
    liou = dense_liouvillian(lind)
    evals, evecs = np.linalg.eig(liou)
    order = np.argsort(np.abs(evals))
    if len(order) > 1 and np.abs(evals[order[1]]) < degeneracy_tol:
        raise NonUniqueSteadyStateError(
            f"two Liouvillian eigenvalues within {degeneracy_tol} of zero: "
            f"{evals[order[0]]:.3e}, {evals[order[1]]:.3e}"
        )
    dim = 2**lind.sites
    rho = evecs[:, order[0]].reshape((dim, dim), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    lam, u = np.linalg.eigh(rho)
    if abs(lam.sum()) < 1e-12:
        lam = -lam
    lam = np.clip(lam, 0.0, None)
    rho = (u * (lam / lam.sum())[None, :]) @ u.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.linalg.norm(liou @ rho.reshape(-1, order="F"))
    if residual > 1e-8:
        raise NonUniqueSteadyStateError(f"steady-state residual {residual:.3e} exceeds 1e-8")
    return rho


def gram_factors(model) -> list[np.ndarray]:
    """Factor matrices whose Gram products multiply element-wise to rho."""
    if isinstance(model, TabulatedGhdo):
        return list(model.factors)
    n = model.n_sites
    if n > MAX_DENSE_MODEL_SITES:
        raise CapacityError(f"dense reconstruction supports N <= {MAX_DENSE_MODEL_SITES}, got {n}")
    configs = all_configs(n)
    psi = model.psi_tables(configs)
    rows = np.arange(2**n)
    out = []
    for h in range(n):
        s_idx = ((configs[:, h] + 1) // 2).astype(np.int64)
        out.append(psi[rows, h, s_idx, :])
    return out


def dense_from_model(model) -> np.ndarray:
    """Full 2^N x 2^N matrix of a GHDO/AGHDO model by enumeration."""
    if model.n_sites > MAX_DENSE_MODEL_SITES:
        raise CapacityError(f"dense reconstruction supports N <= {MAX_DENSE_MODEL_SITES}, got {model.n_sites}")
    factors = gram_factors(model)
    dim = 2**model.n_sites
    rho = np.ones((dim, dim), dtype=complex)
    for f in factors:
        rho *= f @ f.conj().T
    return rho


def _require_hermitian(mat: np.ndarray, name: str, tol: float = 1e-10):
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InputError(f"{name} must be square, got shape {mat.shape}")
    if np.max(np.abs(mat - mat.conj().T)) > tol:
        raise InputError(f"{name} is not Hermitian within {tol}")


def hadamard_product_check(a, b) -> float:
    """Smallest eigenvalue of the element-wise product of two PSD matrices.

    The product theorem guarantees it is nonnegative; anything below
    -1e-10 is reported as a failure.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _require_hermitian(a, "first factor")
    _require_hermitian(b, "second factor")
    min_eig = float(np.linalg.eigvalsh(a * b).min())
    if min_eig < -1e-10:
        raise InputError(f"Hadamard product has eigenvalue {min_eig:.3e} < -1e-10")
    return min_eig


def positive_series_apply(coefficients, a, radius: float | None = None) -> np.ndarray:
    """Element-wise truncated power series with nonnegative coefficients.

    B_ij = sum_l c_l A_ij^l stays Hermitian PSD for PSD input A; the
    result is checked to -1e-9 before returning.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    if np.any(coefficients < 0):
        raise InputError("series coefficients must be nonnegative")
    a = np.asarray(a, dtype=complex)
    _require_hermitian(a, "series argument")
    max_entry = float(np.max(np.abs(a)))
    if radius is not None and max_entry >= radius:
        raise InputError(f"max |A_ij| = {max_entry:.3e} outside the convergence radius {radius}")
    b = np.zeros_like(a)
    power = np.ones_like(a)
    for c in coefficients:
        b += c * power
        power = power * a
    b = 0.5 * (b + b.conj().T)
    min_eig = float(np.linalg.eigvalsh(b).min())
    if min_eig < -1e-9:
        raise InputError(f"series output has eigenvalue {min_eig:.3e} < -1e-9")
    return b


def dense_observable(rho: np.ndarray, op: LocalOperator, n_sites: int | None = None) -> complex:
    """Tr(rho Op) with the local operator embedded at its support."""
    rho = np.asarray(rho, dtype=complex)
    if n_sites is None:
        n_sites = int(round(np.log2(rho.shape[0])))
    return complex(np.trace(rho @ embed_operator(op, n_sites)))


def dense_renyi2(rho: np.ndarray) -> float:
    """Base-2 second Renyi entropy -log2 Tr(rho^dagger rho)."""
    rho = np.asarray(rho, dtype=complex)
    purity = float(np.sum(np.abs(rho) ** 2))
    return -np.log2(purity)


def dense_magnetizations(rho: np.ndarray, n_sites: int) -> dict[str, float]:
    """Site-averaged <x>, <y>, <z> of a dense state."""
    out = {}
    for axis in ("x", "y", "z"):
        vals = [dense_observable(rho, LocalOperator((i,), PAULI[axis]), n_sites).real for i in range(n_sites)]
        out[axis] = float(np.mean(vals))
    return out
