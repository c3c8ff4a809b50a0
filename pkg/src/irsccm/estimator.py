"""Structured covariance recovery from compressed second-order statistics.

Fits a PSD 3-level Toeplitz matrix R to a sample covariance of compressed
observations by minimizing

    0.5 * ||Rhat_y - W R W^H||_F^2 + lam * tr(R)

with a three-block ADMM: A carries the unconstrained fit, V the Toeplitz
generator, B the PSD copy. Per iteration the A-update solves the linear
system Xi A Xi + kappa A = C, kappa = eta + rho, in the eigenbasis of
Xi = W^H W, the V-update averages Upsilon + eta*A over each lag set, and
the B-update eigen-clips A - Lambda/rho; both duals then take a gradient
step.

The problem is solved on inputs normalized by the spectral norm of Rhat_y
(with lam scaled the same way), which leaves the minimizer exactly
proportional and keeps the default penalties meaningful across input
scales.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .toeplitz import (
    LagIndexSets,
    ToeplitzGenerator3,
    lag_index_sets,
    toeplitz_adjoint_average,
    toeplitz_d,
)


class EstimatorError(RuntimeError):
    """The ADMM iteration produced unusable iterates."""


class IllPosedSubproblemError(EstimatorError):
    """A linear subproblem is singular for the chosen penalties."""


# Calibrated once by grid search over {1e-6..1e-2} on the default simulated
# setup (4x64 array, J=60, T=50, SNR -10 and 0 dB), maximizing the rank-r
# subspace efficiency of the estimate; 1e-5 strictly beat lam=0 at both SNRs
# while 1e-4 and above over-shrank the high-SNR estimate.
DEFAULT_LAMBDA_C = 1e-5
_TINY = 1e-300


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


@dataclass(frozen=True)
class AdmmConfig:
    """Penalties and stopping rule for the covariance ADMM.

    lam is the trace regularization weight (None selects it from the data),
    rho the PSD-split penalty (None auto-scales with the sensing matrix),
    eta the Toeplitz-split penalty (None matches rho). Iterations stop when
    both relative primal residuals and the relative change of A drop below
    tol.
    """

    lam: float | None = None
    eta: float | None = None
    rho: float | None = None
    max_iters: int = 2000
    tol: float = 1e-6
    lambda_c: float = DEFAULT_LAMBDA_C

    def __post_init__(self):
        for name in ("eta", "rho"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive when given, got {v!r}")
        if self.lam is not None and not self.lam >= 0:
            raise ValueError(f"lam must be nonnegative when given, got {self.lam!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ValueError("tol must be positive")
        if not (np.isfinite(self.lambda_c) and self.lambda_c > 0):
            raise ValueError("lambda_c must be positive")


def select_lambda(
    rhat_y: np.ndarray,
    w: np.ndarray,
    t_frames: float,
    rank_guess: int | None = None,
    c: float = DEFAULT_LAMBDA_C,
) -> float:
    """Data-driven trace penalty: c * ||W||_F^2 * ||Rhat_y||_2 * max(sqrt(d), d)
    with d = effective_rank(Rhat_y) * log(T*J) / T.

    The weight shrinks as the frame count grows (at rate 1/sqrt(T)) and
    vanishes for T = inf. rank_guess is accepted for signature stability but
    unused: the bound's rank factor cancels against the per-rank weight.
    """
    del rank_guess
    rhat_y = np.asarray(rhat_y)
    j = rhat_y.shape[0]
    if rhat_y.shape != (j, j):
        raise ValueError("rhat_y must be square")
    if not t_frames >= 1:
        raise ValueError(f"t_frames must be >= 1, got {t_frames!r}")
    if not c > 0:
        raise ValueError("c must be positive")
    evals = np.linalg.eigvalsh(_hermitize(rhat_y))
    spec = float(np.max(np.abs(evals))) if evals.size else 0.0
    if spec == 0.0:
        return 0.0
    if math.isinf(t_frames):
        return 0.0
    eff_rank = float(np.trace(rhat_y).real) / spec
    delta = eff_rank * math.log(t_frames * j) / t_frames
    w_f2 = float(np.sum(np.abs(w) ** 2))
    return c * w_f2 * spec * max(math.sqrt(delta), delta)


@dataclass
class AdmmWorkspace:
    """Iteration-invariant quantities: the lag partition, the compressed
    data term W^H Rhat W, the eigenbasis of Xi = W^H W, the elementwise
    denominators of the A-update, and the resolved penalties."""

    sets: LagIndexSets
    wt_rw: np.ndarray
    evecs: np.ndarray
    evals: np.ndarray
    denom: np.ndarray
    lam: float
    eta: float
    rho: float


def prepare_workspace(
    rhat_y: np.ndarray,
    w: np.ndarray,
    dims,
    lam: float,
    eta: float | None = None,
    rho: float | None = None,
) -> AdmmWorkspace:
    """Precompute the eigen-structure of the A-update for the given data.

    Raises IllPosedSubproblemError when some denominator
    evals_i * evals_j + eta + rho falls below 1e-12 in magnitude; pick
    larger penalties in that case.
    """
    sets = lag_index_sets(dims)
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2 or w.shape[1] != sets.side:
        raise ValueError(f"w must be J x {sets.side} for dims {tuple(dims)}")
    rhat_y = np.asarray(rhat_y, dtype=complex)
    if rhat_y.shape != (w.shape[0], w.shape[0]):
        raise ValueError("rhat_y must be J x J with J matching w")
    xi = _hermitize(w.conj().T @ w)
    evals, evecs = np.linalg.eigh(xi)
    if rho is None:
        # scale with the average eigenvalue of Xi, i.e. ||W||_F^2 / (N*M)
        rho = max(float(evals.mean()), _TINY)
    if eta is None:
        eta = rho
    kappa = eta + rho
    denom = np.multiply.outer(evals, evals) + kappa
    if np.min(np.abs(denom)) < 1e-12:
        raise IllPosedSubproblemError(
            "A-update denominators vanish; increase the penalties "
            f"(min |denominator| = {np.min(np.abs(denom)):.3e})"
        )
    wt_rw = _hermitize(w.conj().T @ rhat_y @ w)
    return AdmmWorkspace(
        sets=sets, wt_rw=wt_rw, evecs=evecs, evals=evals, denom=denom,
        lam=float(lam), eta=float(eta), rho=float(rho),
    )


@dataclass
class AdmmState:
    """Mutable iterates: fit copy a, generator v with its dense form t3v,
    PSD copy b, and the two duals."""

    a: np.ndarray
    v: np.ndarray
    b: np.ndarray
    upsilon: np.ndarray
    lam_dual: np.ndarray
    t3v: np.ndarray | None = None

    def __post_init__(self):
        if self.t3v is None:
            self.t3v = toeplitz_d(self.v)


def init_state(ws: AdmmWorkspace) -> AdmmState:
    """Warm start from the scaled back-projection of the data term."""
    w_f2 = max(float(ws.evals.sum()), _TINY)
    v0 = toeplitz_adjoint_average(ws.wt_rw, ws.sets) / w_f2
    t3v0 = toeplitz_d(v0)
    side = ws.sets.side
    zero = np.zeros((side, side), dtype=complex)
    return AdmmState(
        a=t3v0.copy(), v=v0, b=t3v0.copy(),
        upsilon=zero.copy(), lam_dual=zero.copy(), t3v=t3v0,
    )


def update_a(state: AdmmState, ws: AdmmWorkspace) -> np.ndarray:
    """Solve Xi A Xi + kappa A = C elementwise in the eigenbasis of Xi,
    where C collects the data term, the regularizer, both splits and both
    duals evaluated at the current iterates."""
    side = ws.sets.side
    c_mat = (
        ws.eta * state.t3v
        + ws.rho * state.b
        + ws.wt_rw
        - ws.lam * np.eye(side)
        - state.upsilon
        + state.lam_dual
    )
    c1 = ws.evecs.conj().T @ c_mat @ ws.evecs
    a3 = c1 / ws.denom
    return _hermitize(ws.evecs @ a3 @ ws.evecs.conj().T)


def update_v(state: AdmmState, ws: AdmmWorkspace) -> np.ndarray:
    """Per-lag average of Upsilon + eta*A divided by eta: the exact
    minimizer of the V block over all generators."""
    delta = state.upsilon + ws.eta * state.a
    return toeplitz_adjoint_average(delta, ws.sets) / ws.eta


def update_b(state: AdmmState, ws: AdmmWorkspace) -> np.ndarray:
    """PSD projection (eigenvalue clipping) of A - Lambda/rho."""
    btil = _hermitize(state.a - state.lam_dual / ws.rho)
    evals, evecs = np.linalg.eigh(btil)
    clipped = np.clip(evals, 0.0, None)
    return _hermitize((evecs * clipped) @ evecs.conj().T)


def update_duals(state: AdmmState, ws: AdmmWorkspace) -> tuple[np.ndarray, np.ndarray]:
    """Gradient ascent on both duals at the freshly updated primal iterates."""
    ups = _hermitize(state.upsilon + ws.eta * (state.a - state.t3v))
    lam_dual = _hermitize(state.lam_dual + ws.rho * (state.b - state.a))
    return ups, lam_dual


@dataclass
class AdmmDiagnostics:
    """Residual curves and resolved settings of one solve. r_struct tracks
    ||A - T3(V)|| / ||A||, r_split tracks ||B - A|| / ||A||, a_change the
    relative step length of A."""

    iterations: int
    converged: bool
    r_struct: list = field(default_factory=list)
    r_split: list = field(default_factory=list)
    a_change: list = field(default_factory=list)
    lam: float = 0.0
    eta: float = 0.0
    rho: float = 0.0
    scale: float = 0.0
    best_iteration: int = 0
    objective_final: float = 0.0
    objective_zero: float = 0.0


@dataclass(frozen=True)
class CcmEstimate:
    """Estimated covariance: dense PSD matrix, its generator, diagnostics."""

    rh_hat: np.ndarray
    v_hat: ToeplitzGenerator3
    diagnostics: AdmmDiagnostics


def _fit_objective(rhat_y: np.ndarray, w: np.ndarray, rh: np.ndarray, lam: float) -> float:
    resid = rhat_y - w @ rh @ w.conj().T
    return 0.5 * float(np.sum(np.abs(resid) ** 2)) + lam * float(np.trace(rh).real)


def estimate_ccm(
    rhat_y: np.ndarray,
    w: np.ndarray,
    dims,
    cfg: AdmmConfig | None = None,
    *,
    t_frames: float | None = None,
) -> CcmEstimate:
    """Run the ADMM to convergence and return the PSD-projected Toeplitz
    estimate.

    When cfg.lam is None the weight comes from select_lambda, which needs
    t_frames (use math.inf for an exact second-order input). On
    non-convergence within max_iters the iterate with the smallest maximum
    primal residual is returned and flagged in the diagnostics.
    """
    cfg = cfg or AdmmConfig()
    rhat_y = np.asarray(rhat_y, dtype=complex)
    j = rhat_y.shape[0]
    if rhat_y.shape != (j, j):
        raise ValueError("rhat_y must be square")
    nrm = float(np.linalg.norm(rhat_y))
    asym = float(np.linalg.norm(rhat_y - rhat_y.conj().T))
    if nrm > 0 and asym > 1e-8 * nrm:
        warnings.warn(
            f"rhat_y deviates from Hermitian by {asym / nrm:.2e} relative; "
            "symmetrizing",
            stacklevel=2,
        )
    rhat_y = _hermitize(rhat_y)

    if cfg.lam is not None:
        lam = cfg.lam
    else:
        if t_frames is None:
            raise ValueError("t_frames is required when lam is selected from data")
        lam = select_lambda(rhat_y, w, t_frames, c=cfg.lambda_c)

    sets = lag_index_sets(dims)
    scale = float(np.max(np.abs(np.linalg.eigvalsh(rhat_y)))) if j else 0.0
    if scale == 0.0:
        diag = AdmmDiagnostics(iterations=0, converged=True, lam=lam, scale=0.0)
        gen = ToeplitzGenerator3.zeros(tuple(dims))
        zero = np.zeros((sets.side, sets.side), dtype=complex)
        return CcmEstimate(rh_hat=zero, v_hat=gen, diagnostics=diag)

    ws = prepare_workspace(
        rhat_y / scale, w, dims, lam=lam / scale, eta=cfg.eta, rho=cfg.rho
    )
    state = init_state(ws)
    diag = AdmmDiagnostics(
        iterations=0, converged=False,
        lam=lam, eta=ws.eta, rho=ws.rho, scale=scale,
    )
    best_metric = math.inf
    best_v = state.v
    prev_a = state.a
    for k in range(1, cfg.max_iters + 1):
        state.a = update_a(state, ws)
        state.v = update_v(state, ws)
        state.t3v = toeplitz_d(state.v)
        state.b = update_b(state, ws)
        na = max(float(np.linalg.norm(state.a)), _TINY)
        r_struct = float(np.linalg.norm(state.a - state.t3v)) / na
        r_split = float(np.linalg.norm(state.b - state.a)) / na
        change = float(np.linalg.norm(state.a - prev_a)) / max(
            float(np.linalg.norm(prev_a)), _TINY
        )
        state.upsilon, state.lam_dual = update_duals(state, ws)
        diag.r_struct.append(r_struct)
        diag.r_split.append(r_split)
        diag.a_change.append(change)
        diag.iterations = k
        if not np.isfinite(na) or not np.all(np.isfinite(state.v)):
            raise EstimatorError(f"iterates diverged at iteration {k}")
        metric = max(r_struct, r_split)
        if metric < best_metric:
            best_metric = metric
            best_v = state.v
            diag.best_iteration = k
        if r_struct < cfg.tol and r_split < cfg.tol and change < cfg.tol:
            diag.converged = True
            break
        prev_a = state.a

    v_out = state.v if diag.converged else best_v
    gen = v_out * scale
    dense = _hermitize(toeplitz_d(gen))
    evals, evecs = np.linalg.eigh(dense)
    rh_hat = _hermitize((evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T)
    diag.objective_final = _fit_objective(rhat_y, w, rh_hat, lam)
    diag.objective_zero = 0.5 * float(np.sum(np.abs(rhat_y) ** 2))
    return CcmEstimate(
        rh_hat=rh_hat, v_hat=ToeplitzGenerator3(gen), diagnostics=diag
    )
