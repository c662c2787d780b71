"""Stochastic variational time evolution towards the Lindblad steady state.

Each step draws a joint batch, estimates the geometric tensor S and force
vector F as importance-weighted covariances of the logarithmic derivatives
and the local Liouvillian estimator, solves the regularized linear system
(S + lambda I) dw = F by conjugate gradients, and applies an explicit
Euler update to the real parameter vector. The solve never materializes S:
it runs on the centered, weight-scaled derivative matrix, so the cost per
CG iteration is one pass over the batch.

Heavy regularization gives weak convergence: the trajectory is not the
physical dynamics, but its fixed points are steady states, where the force
vanishes identically.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateBatchError
from .lindblad import LindbladModel, l_loc_batch
from .sampling import SampleBatch, magnetization_values, sample_joint_alpha

ALPHA_CHOICES = (0.2, 0.5, 0.8)
GRAD_CHUNK = 512

DIAGNOSTICS_COLUMNS = (
    "step", "time", "alpha", "mag_x", "mag_y", "mag_z", "purity", "ess",
    "n_valid", "lloc_sq", "cg_iterations", "cg_residual", "cg_converged", "step_ok",
)


@dataclass(frozen=True)
class TdvpConfig:
    """Knobs of the time-evolution driver.

    alpha is either a float in [0, 1] or the string "adaptive", in which
    case it follows the smoothed purity estimate, snapped to 0.2 / 0.5 /
    0.8 every alpha_update_interval steps. Convergence requires the drift
    of the windowed means of <x>, <z> and the purity to fall below
    convergence_tol (relative for O(1) values, absolute below that).
    """

    dt: float = 1e-3
    regularization: float = 1e-3
    cg_tol: float = 1e-6
    cg_max_iters: int = 400
    samples_per_step: int = 1024
    alpha: float | str = 0.5
    max_steps: int = 2000
    convergence_window: int = 200
    convergence_tol: float = 1e-3
    alpha_update_interval: int = 50

    def __post_init__(self):
        if self.dt < 0:
            raise ConfigurationError(f"dt must be >= 0, got {self.dt}")
        if self.regularization < 0:
            raise ConfigurationError(f"regularization must be >= 0, got {self.regularization}")
        if self.samples_per_step < 1:
            raise ConfigurationError(f"samples_per_step must be >= 1, got {self.samples_per_step}")
        if self.cg_tol <= 0 or self.cg_max_iters < 1:
            raise ConfigurationError("cg_tol must be positive and cg_max_iters >= 1")
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.convergence_window < 2 or self.convergence_tol <= 0:
            raise ConfigurationError("convergence_window must be >= 2 and convergence_tol positive")
        if isinstance(self.alpha, str):
            if self.alpha != "adaptive":
                raise ConfigurationError(f"alpha must be a float in [0, 1] or 'adaptive', got {self.alpha!r}")
        elif not 0.0 <= float(self.alpha) <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass
class SolveResult:
    dw: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass
class StepResult:
    model: object
    diagnostics: dict
    ok: bool


@dataclass
class RunResult:
    model: object
    diagnostics: list[dict] = field(default_factory=list)
    converged: bool = False
    steps: int = 0


class _CenteredFactors:
    """Weighted centered derivative matrix; applies S without forming it."""

    def __init__(self, grads: np.ndarray, weights: np.ndarray, lloc: np.ndarray):
        w_norm = weights / weights.sum()
        self.o_center = grads - w_norm @ grads
        self.o_center_conj = self.o_center.conj()
        self.l_mean = w_norm @ lloc
        self.l_center = lloc - self.l_mean
        self.w_norm = w_norm

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return (self.w_norm * (self.o_center @ v)) @ self.o_center_conj

    def force(self) -> np.ndarray:
        return (self.w_norm * self.l_center) @ self.o_center_conj

    def s_diagonal(self) -> np.ndarray:
        return np.einsum("n,ni->i", self.w_norm, np.abs(self.o_center) ** 2).real

    def dense_s(self) -> np.ndarray:
        s = self.o_center_conj.T @ (self.w_norm[:, None] * self.o_center)
        return 0.5 * (s + s.conj().T)


def _grads_chunked(model, sigma, eta):
    n = sigma.shape[0]
    if n <= GRAD_CHUNK:
        return model.log_rho_with_grad(sigma, eta)[1]
    out = None
    for lo in range(0, n, GRAD_CHUNK):
        hi = min(lo + GRAD_CHUNK, n)
        chunk = model.log_rho_with_grad(sigma[lo:hi], eta[lo:hi])[1]
        if out is None:
            out = np.empty((n, chunk.shape[1]), dtype=complex)
        out[lo:hi] = chunk
    return out


def _centered_factors(model, lind: LindbladModel, batch: SampleBatch) -> _CenteredFactors:
    valid = batch.weight > 0
    if not valid.any():
        raise DegenerateBatchError("all importance weights vanish in the TDVP batch")
    sigma, eta = batch.sigma[valid], batch.eta[valid]
    grads = _grads_chunked(model, sigma, eta)
    lloc = l_loc_batch(model, lind, sigma, eta)
    return _CenteredFactors(grads, batch.weight[valid], lloc)


def estimate_S_F(model, lind: LindbladModel, batch: SampleBatch):
    """Dense geometric tensor and force vector from a sample batch.

    S_ij = E[O_i* O_j] - E[O_i*] E[O_j] and F_i = E[O_i* L_loc] -
    E[O_i*] E[L_loc], with self-normalized importance weights; S comes
    back explicitly Hermitized.
    """
    factors = _centered_factors(model, lind, batch)
    return factors.dense_s(), factors.force()


def solve_regularized(s, f: np.ndarray, regularization: float,
                      cg_tol: float = 1e-6, cg_max_iters: int = 400,
                      preconditioner: np.ndarray | None = None) -> SolveResult:
    """Conjugate-gradient solve of (S + lambda I) dw = F.

    s is either a dense Hermitian matrix or a callable computing S @ v;
    preconditioner, when given, is the diagonal of a Jacobi preconditioner.
    Non-convergence is flagged and the last iterate returned; the reported
    residual is recomputed explicitly from the returned iterate.
    """
    matvec = s if callable(s) else (lambda v: s @ v)
    f = np.asarray(f, dtype=complex)
    f_norm = float(np.linalg.norm(f))
    if f_norm == 0.0:
        return SolveResult(np.zeros_like(f), 0.0, 0, True)
    if preconditioner is None:
        inv_m = None
    else:
        inv_m = 1.0 / np.clip(np.asarray(preconditioner, dtype=float), 1e-300, None)
    x = np.zeros_like(f)
    r = f.copy()
    z = r if inv_m is None else inv_m * r
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    iterations = 0
    converged = False
    for _ in range(cg_max_iters):
        ap = matvec(p) + regularization * p
        denom = np.vdot(p, ap).real
        if denom <= 0.0:
            break
        step_len = rz / denom
        x += step_len * p
        r -= step_len * ap
        iterations += 1
        if np.linalg.norm(r) <= cg_tol * f_norm:
            converged = True
            break
        z = r if inv_m is None else inv_m * r
        rz_new = float(np.vdot(r, z).real)
        p = z + (rz_new / rz) * p
        rz = rz_new
    residual = float(np.linalg.norm(matvec(x) + regularization * x - f) / f_norm)
    return SolveResult(x, residual, iterations, converged)


def step(model, lind: LindbladModel, config: TdvpConfig, rng: np.random.Generator,
         alpha: float | None = None) -> StepResult:
    """One Euler step of the regularized variational flow.

    A degenerate batch aborts the step and leaves the parameters alone;
    CG non-convergence is flagged in the diagnostics but the iterate is
    still applied.
    """
    if alpha is None:
        alpha = 0.5 if isinstance(config.alpha, str) else float(config.alpha)
    t0 = time.perf_counter()
    batch = sample_joint_alpha(model, alpha, config.samples_per_step, rng)
    mags = magnetization_values(model, batch.sigma)
    row = {
        "alpha": alpha,
        "mag_x": float(np.nanmean(mags["x"].real)),
        "mag_y": float(np.nanmean(mags["y"].real)),
        "mag_z": float(np.nanmean(mags["z"].real)),
        "purity": float(batch.weight.mean()),
        "n_valid": int(np.count_nonzero(batch.weight > 0)),
    }
    try:
        factors = _centered_factors(model, lind, batch)
    except DegenerateBatchError:
        row.update(ess=0.0, lloc_sq=np.nan, cg_iterations=0, cg_residual=np.nan,
                   cg_converged=False, step_ok=False, wall_time=time.perf_counter() - t0)
        return StepResult(model, row, False)
    w = batch.weight[batch.weight > 0]
    row["ess"] = float(w.sum() ** 2 / np.sum(w**2))
    row["lloc_sq"] = float(
        np.sum(factors.w_norm * np.abs(factors.l_center + factors.l_mean) ** 2).real
    )
    # For real parameters the variational metric is Re(S) and the equation of
    # motion reads Re(S) dw = Re(F); dw stays real throughout the solve.
    sol = solve_regularized(lambda v: factors.matvec(v).real.astype(complex),
                            factors.force().real.astype(complex),
                            config.regularization, config.cg_tol, config.cg_max_iters,
                            preconditioner=factors.s_diagonal() + config.regularization)
    row.update(cg_iterations=sol.iterations, cg_residual=sol.residual,
               cg_converged=sol.converged, step_ok=True,
               wall_time=time.perf_counter() - t0)
    new_params = model.params + config.dt * sol.dw.real
    return StepResult(model.with_params(new_params), row, True)


def _window_drift(series: list[float], window: int) -> float:
    tail = np.asarray(series[-window:], dtype=float)
    half = window // 2
    first, second = tail[:half].mean(), tail[half:].mean()
    scale = max(1.0, abs(tail.mean()))
    return abs(second - first) / scale


def _snap_alpha(purity: float) -> float:
    clamped = min(max(purity, ALPHA_CHOICES[0]), ALPHA_CHOICES[-1])
    return min(ALPHA_CHOICES, key=lambda a: abs(a - clamped))


def run_to_steady_state(model, lind: LindbladModel, config: TdvpConfig,
                        rng: np.random.Generator, on_step=None) -> RunResult:
    """Iterate steps until the tracked observables stop drifting.

    Tracks <x>, <z> and the purity over the trailing convergence window;
    hitting max_steps without convergence is reported through the flag,
    not as an error. on_step(step_index, model, row) runs after every step.
    """
    rows: list[dict] = []
    tracked: dict[str, list[float]] = {"mag_x": [], "mag_z": [], "purity": []}
    adaptive = isinstance(config.alpha, str)
    alpha = 0.5 if adaptive else float(config.alpha)
    converged = False
    for k in range(config.max_steps):
        result = step(model, lind, config, rng, alpha=alpha)
        model = result.model
        row = {"step": k, "time": k * config.dt, **result.diagnostics}
        rows.append(row)
        for key in tracked:
            tracked[key].append(row[key])
        if on_step is not None:
            on_step(k, model, row)
        if adaptive and (k + 1) % config.alpha_update_interval == 0:
            recent = np.asarray(tracked["purity"][-config.alpha_update_interval:])
            recent = recent[np.isfinite(recent)]
            if recent.size:
                alpha = _snap_alpha(float(recent.mean()))
        window = config.convergence_window
        if len(rows) >= window:
            if all(_window_drift(tracked[key], window) <= config.convergence_tol for key in tracked):
                converged = True
                break
    return RunResult(model, rows, converged, len(rows))
