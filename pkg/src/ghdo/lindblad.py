"""Local operators, the dissipative TFIM builder, and the local estimators.

Operators are dense matrices on supports of at most two sites (all the
benchmark model needs). Local estimators evaluate ratios of density-matrix
elements in log space; for a batch of sample pairs all connected elements
are gathered into a single model evaluation, which is what keeps the TDVP
step affordable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAmplitudeError, InputError
from .models import log_rho_pairs
from .spins import as_config, as_config_batch

# Local basis: index 0 is spin -1 (down), index 1 is spin +1 (up).
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
PAULI_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
PAULI = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


@dataclass(frozen=True)
class LocalOperator:
    """Dense operator acting on an ordered tuple of sites (k <= 2)."""

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        k = len(support)
        if k < 1 or k > 2:
            raise InputError(f"operator support must have 1 or 2 sites, got {k}")
        if len(set(support)) != k:
            raise InputError(f"operator support sites must be distinct, got {support}")
        if self.matrix.shape != (2**k, 2**k):
            raise InputError(f"operator matrix has shape {self.matrix.shape}, expected {(2**k, 2**k)}")


def pauli_site(axis: str, site: int) -> LocalOperator:
    return LocalOperator((site,), PAULI[axis])


@dataclass
class LindbladModel:
    """Hamiltonian terms plus jump operators on an N-site chain."""

    sites: int
    hamiltonian_terms: list[LocalOperator]
    jump_operators: list[LocalOperator]
    _ldag_l: list[LocalOperator] = field(init=False, repr=False)

    def __post_init__(self):
        for op in [*self.hamiltonian_terms, *self.jump_operators]:
            if any(s < 0 or s >= self.sites for s in op.support):
                raise InputError(f"operator support {op.support} out of range for {self.sites} sites")
        for op in self.hamiltonian_terms:
            if np.max(np.abs(op.matrix - op.matrix.conj().T)) > 1e-12:
                raise InputError(f"Hamiltonian term on {op.support} is not Hermitian")
        self._ldag_l = [
            LocalOperator(op.support, op.matrix.conj().T @ op.matrix) for op in self.jump_operators
        ]


def build_tfim(n_sites: int, v: float, g: float, gamma: float, periodic: bool = True) -> LindbladModel:
    """Dissipative transverse-field Ising chain.

    Couplings (v/4) z_i z_j on nearest-neighbor bonds, fields (g/2) x_i,
    and decay jumps sqrt(gamma) sigma^-_i on every site. With periodic
    boundaries the chain has N bonds (the wrap bond included once).
    """
    zz = (v / 4.0) * np.kron(PAULI_Z, PAULI_Z)
    terms = []
    n_bonds = 0 if n_sites < 2 else (n_sites if periodic else n_sites - 1)
    for i in range(n_bonds):
        terms.append(LocalOperator((i, (i + 1) % n_sites), zz))
    for i in range(n_sites):
        terms.append(LocalOperator((i,), (g / 2.0) * PAULI_X))
    jumps = [LocalOperator((i,), np.sqrt(gamma) * SIGMA_MINUS) for i in range(n_sites)]
    return LindbladModel(n_sites, terms, jumps)


def _local_indices(configs: np.ndarray, support: tuple[int, ...]) -> np.ndarray:
    """Row index of each configuration restricted to the support."""
    idx = np.zeros(configs.shape[0], dtype=np.int64)
    for s in support:
        idx = 2 * idx + (configs[:, s] + 1) // 2
    return idx


def _with_local_state(configs: np.ndarray, support: tuple[int, ...], col: int) -> np.ndarray:
    """Copies of the configurations with the support set to local state col."""
    out = configs.copy()
    for pos, s in enumerate(reversed(support)):
        out[:, s] = 2 * ((col >> pos) & 1) - 1
    return out


def connected_elements(op: LocalOperator, sigma) -> list[tuple[np.ndarray, complex]]:
    """All (sigma', <sigma|op|sigma'>) with nonzero amplitude."""
    sigma = as_config(sigma)
    row = int(_local_indices(sigma[None, :], op.support)[0])
    out = []
    for col in range(op.matrix.shape[1]):
        amp = op.matrix[row, col]
        if amp != 0:
            out.append((_with_local_state(sigma[None, :], op.support, col)[0], complex(amp)))
    return out


class _PairBuffer:
    """Accumulates (x, y, coefficient, target-row) contributions for one batched solve."""

    def __init__(self):
        self.xs, self.ys, self.coeffs, self.rows = [], [], [], []

    def add(self, x, y, coeff, rows):
        if len(rows):
            self.xs.append(x)
            self.ys.append(y)
            self.coeffs.append(np.asarray(coeff, dtype=complex))
            self.rows.append(rows)

    def reduce(self, model, log_den: np.ndarray, n_rows: int) -> np.ndarray:
        """Sum coeff * rho(x, y) / rho_den over contributions, per target row."""
        out = np.zeros(n_rows, dtype=complex)
        if not self.xs:
            return out
        x = np.concatenate(self.xs)
        y = np.concatenate(self.ys)
        coeff = np.concatenate(self.coeffs)
        rows = np.concatenate(self.rows)
        log_num = log_rho_pairs(model, x, y)
        good = np.isfinite(log_num.real) & np.isfinite(log_den.real)[rows]
        ratio = np.zeros(log_num.shape, dtype=complex)
        ratio[good] = np.exp(log_num[good] - log_den[rows[good]])
        np.add.at(out, rows, coeff * ratio)
        return out


def _scatter_op_terms(buf: _PairBuffer, op: LocalOperator, configs, partner, rows, side: str, scale):
    """Connected elements of op from `configs`, paired against `partner`.

    side "left" adds scale * <s|op|s'> rho(s', partner); side "right" adds
    scale * conj(<e|op|e'>) rho(partner, e').
    """
    loc = _local_indices(configs, op.support)
    for col in range(op.matrix.shape[1]):
        amps = op.matrix[loc, col]
        nz = np.flatnonzero(amps != 0)
        if nz.size == 0:
            continue
        moved = _with_local_state(configs[nz], op.support, col)
        if side == "left":
            buf.add(moved, partner[nz], scale * amps[nz], rows[nz])
        else:
            buf.add(partner[nz], moved, scale * amps[nz].conj(), rows[nz])


def a_loc_batch(model, op: LocalOperator, configs) -> np.ndarray:
    """Local estimator of a k-local operator on diagonal samples.

    A_loc(sigma) = sum_{sigma'} <sigma|op|sigma'> rho(sigma', sigma) / rho(sigma, sigma).
    Rows with an underflowing diagonal come back NaN; callers skip them.
    """
    configs = as_config_batch(configs, model.n_sites)
    n = configs.shape[0]
    log_den = log_rho_pairs(model, configs, configs)
    buf = _PairBuffer()
    _scatter_op_terms(buf, op, configs, configs, np.arange(n), "left", 1.0)
    out = buf.reduce(model, log_den, n)
    out[~np.isfinite(log_den.real)] = np.nan
    return out


def a_loc(model, op: LocalOperator, sigma) -> complex:
    out = a_loc_batch(model, op, np.atleast_2d(as_config(sigma, model.n_sites)))[0]
    if not np.isfinite(out.real):
        raise DegenerateAmplitudeError("rho(sigma, sigma) underflowed; skip the sample")
    return complex(out)


def l_loc_batch(model, lind: LindbladModel, sigma, eta) -> np.ndarray:
    """Local estimator of the Liouvillian, <s|L rho|e> / <s|rho|e>, per pair.

    Expands the commutator, the jump sandwich and the anticommutator
    through connected elements; every needed matrix element goes through
    one deduplicated model evaluation. Pairs whose denominator underflows
    come back NaN.
    """
    sigma = as_config_batch(sigma, model.n_sites)
    eta = as_config_batch(eta, model.n_sites)
    n = sigma.shape[0]
    rows = np.arange(n)
    log_den = log_rho_pairs(model, sigma, eta)
    buf = _PairBuffer()
    for term in lind.hamiltonian_terms:
        _scatter_op_terms(buf, term, sigma, eta, rows, "left", -1j)
        _scatter_op_terms(buf, term, eta, sigma, rows, "right", 1j)
    for jump, ldl in zip(lind.jump_operators, lind._ldag_l):
        loc_s = _local_indices(sigma, jump.support)
        loc_e = _local_indices(eta, jump.support)
        dim = jump.matrix.shape[1]
        for cs in range(dim):
            amp_s = jump.matrix[loc_s, cs]
            for ce in range(dim):
                amp = amp_s * jump.matrix[loc_e, ce].conj()
                nz = np.flatnonzero(amp != 0)
                if nz.size == 0:
                    continue
                buf.add(
                    _with_local_state(sigma[nz], jump.support, cs),
                    _with_local_state(eta[nz], jump.support, ce),
                    amp[nz],
                    rows[nz],
                )
        _scatter_op_terms(buf, ldl, sigma, eta, rows, "left", -0.5)
        _scatter_op_terms(buf, ldl, eta, sigma, rows, "right", -0.5)
    out = buf.reduce(model, log_den, n)
    out[~np.isfinite(log_den.real)] = np.nan
    return out


def l_loc(model, lind: LindbladModel, sigma, eta) -> complex:
    out = l_loc_batch(
        model,
        lind,
        np.atleast_2d(as_config(sigma, model.n_sites)),
        np.atleast_2d(as_config(eta, model.n_sites)),
    )[0]
    if not np.isfinite(out.real):
        raise DegenerateAmplitudeError("rho(sigma, eta) underflowed; skip the sample")
    return complex(out)
