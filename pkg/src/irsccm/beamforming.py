"""Two-timescale beamforming: long-term IRS phases from the cascade
covariance, short-term BS precoding per realization.

The IRS phase design maximizes the average effective channel gain
psi^T Rbar psi* over unit-modulus psi, where Rbar sums the per-BS-antenna
diagonal blocks of the cascade covariance. The unit-modulus program is
lifted to the semidefinite relaxation

    max Tr(Rbar V)  s.t.  diag(V) = 1, V PSD,

solved by an ADMM splitting (affine step with pinned diagonal, PSD
projection, scaled dual), certified by a dual feasibility bound, and
rounded back to phases by Gaussian randomization. The lifted variable
models psi* psi^T, so candidate phases are the conjugated signs of the
draws.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def reduce_ccm(rh: np.ndarray, n_bs: int) -> np.ndarray:
    """Sum the N diagonal M x M blocks of the NM x NM cascade covariance:
    the covariance of the IRS-side effective channel, E[H H^H]."""
    rh = np.asarray(rh)
    side = rh.shape[0]
    if rh.ndim != 2 or rh.shape != (side, side):
        raise ValueError("rh must be square")
    if n_bs < 1 or side % n_bs:
        raise ValueError(f"matrix side {side} is not divisible by n_bs={n_bs}")
    m = side // n_bs
    return np.einsum("kikj->ij", rh.reshape(n_bs, m, n_bs, m))


@dataclass(frozen=True)
class SdrConfig:
    """ADMM settings for the phase relaxation: penalty rho (on the
    normalized problem), iteration cap, relative residual tolerance, and
    the relative duality-gap threshold for the certified flag."""

    rho: float = 1.0
    max_iters: int = 5000
    tol: float = 1e-9
    cert_tol: float = 1e-6

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError("rho must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ValueError("tol must be positive")
        if not (np.isfinite(self.cert_tol) and self.cert_tol >= 0):
            raise ValueError("cert_tol must be nonnegative")


@dataclass(frozen=True)
class SdrSolution:
    """Relaxed phase Gram matrix with its objective value and certificate.

    gap_bound bounds the optimality gap of value from a feasible dual point
    (zero when the complementary dual matrix is PSD); certified means the
    bound is small relative to the problem scale.
    """

    v_relaxed: np.ndarray
    value: float
    gap_bound: float
    converged: bool
    certified: bool
    iterations: int


def sdr_phase_opt(rbar: np.ndarray, cfg: SdrConfig | None = None) -> SdrSolution:
    """Solve the unit-diagonal PSD relaxation of the phase design.

    Works on rbar normalized by its spectral norm; the output V is feasible
    (exactly PSD by projection, diagonal within 1e-8 of one) regardless of
    convergence, with the best available iterate on hitting max_iters.
    """
    cfg = cfg or SdrConfig()
    rbar = np.asarray(rbar, dtype=complex)
    m = rbar.shape[0]
    if rbar.ndim != 2 or rbar.shape != (m, m) or m < 1:
        raise ValueError("rbar must be a nonempty square matrix")
    nrm = float(np.linalg.norm(rbar))
    asym = float(np.linalg.norm(rbar - rbar.conj().T))
    if nrm > 0 and asym > 1e-8 * nrm:
        warnings.warn(
            f"rbar deviates from Hermitian by {asym / nrm:.2e} relative; "
            "symmetrizing",
            stacklevel=2,
        )
    rbar = _hermitize(rbar)
    scale = float(np.max(np.abs(np.linalg.eigvalsh(rbar))))
    if scale == 0.0:
        return SdrSolution(
            v_relaxed=np.eye(m, dtype=complex), value=0.0, gap_bound=0.0,
            converged=True, certified=True, iterations=0,
        )
    r_n = rbar / scale
    rho = cfg.rho
    z = np.eye(m, dtype=complex)
    u = np.zeros((m, m), dtype=complex)
    converged = False
    iterations = cfg.max_iters
    for k in range(1, cfg.max_iters + 1):
        v = z - u + r_n / rho
        np.fill_diagonal(v, 1.0)
        z_prev = z
        evals, evecs = np.linalg.eigh(_hermitize(v + u))
        z = _hermitize((evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T)
        u = u + v - z
        r_primal = float(np.linalg.norm(v - z)) / np.sqrt(m)
        r_dual = rho * float(np.linalg.norm(z - z_prev)) / np.sqrt(m)
        if r_primal < cfg.tol and r_dual < cfg.tol:
            converged = True
            iterations = k
            break

    # z is PSD by projection; a diagonal congruence pins the diagonal at one
    d = np.sqrt(np.clip(np.real(np.diag(z)), 1e-12, None))
    v_out = _hermitize(z / np.outer(d, d))
    value = float(np.real(np.trace(rbar @ v_out)))

    # dual candidate from complementarity: y_i = Re((Rbar V)_ii); the gap of
    # value from the optimum is at most M * max(0, -lambda_min(Diag(y) - Rbar))
    y = np.real(np.diag(rbar @ v_out))
    mu = float(np.linalg.eigvalsh(np.diag(y) - rbar).min())
    gap_bound = m * max(0.0, -mu)
    certified = gap_bound <= cfg.cert_tol * max(abs(value), scale)
    return SdrSolution(
        v_relaxed=v_out, value=value, gap_bound=gap_bound,
        converged=converged, certified=certified, iterations=iterations,
    )


@dataclass(frozen=True)
class PhaseSolution:
    """IRS phase profile from randomized rounding.

    phases are angles (the element response is exp(1j*phases), unit modulus
    by construction); sdr_value is the relaxation objective, an upper bound
    that achieved_value may not exceed beyond rounding error.
    """

    phases: np.ndarray
    sdr_value: float
    achieved_value: float
    n_randomizations: int

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        if phases.ndim != 1:
            raise ValueError("phases must be 1-D")
        if not np.all(np.isfinite(phases)):
            raise ValueError("phases must be finite")
        if self.achieved_value > self.sdr_value + 1e-8 * abs(self.sdr_value):
            raise ValueError(
                f"achieved value {self.achieved_value!r} exceeds the "
                f"relaxation bound {self.sdr_value!r}"
            )
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    @property
    def psi(self) -> np.ndarray:
        return np.exp(1j * self.phases)


def phase_objective(psi: np.ndarray, rbar: np.ndarray) -> float:
    """Average effective gain psi^T Rbar psi* of a phase profile."""
    psi = np.asarray(psi)
    return float(np.real(psi @ np.asarray(rbar) @ psi.conj()))


def gaussian_randomization(
    v_relaxed: np.ndarray,
    rbar: np.ndarray,
    n_draws: int,
    rng: np.random.Generator,
) -> PhaseSolution:
    """Round the relaxed Gram matrix to phases: draw CN(0, V) vectors, take
    the conjugated unit-modulus signs of each, keep the candidate with the
    largest objective (lowest draw index on ties), and gauge the first
    element to zero phase."""
    if n_draws < 1:
        raise ValueError("need at least one randomization draw")
    v_relaxed = _hermitize(np.asarray(v_relaxed, dtype=complex))
    rbar = _hermitize(np.asarray(rbar, dtype=complex))
    m = v_relaxed.shape[0]
    if rbar.shape != (m, m):
        raise ValueError("rbar and v_relaxed shapes differ")
    evals, evecs = np.linalg.eigh(v_relaxed)
    factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
    noise = rng.standard_normal((m, n_draws)) + 1j * rng.standard_normal((m, n_draws))
    draws = factor @ (noise / np.sqrt(2.0))
    candidates = np.exp(-1j * np.angle(draws))
    vals = np.real(np.sum(candidates * (rbar @ candidates.conj()), axis=0))
    best = int(np.argmax(vals))
    psi = candidates[:, best]
    psi = psi * np.exp(-1j * np.angle(psi[0]))
    phases = np.angle(psi)
    phases[0] = 0.0
    achieved = phase_objective(np.exp(1j * phases), rbar)
    sdr_value = float(np.real(np.trace(rbar @ v_relaxed)))
    return PhaseSolution(
        phases=phases, sdr_value=sdr_value, achieved_value=achieved,
        n_randomizations=n_draws,
    )


def random_passive_baseline(m_irs: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random phases: the no-information IRS configuration."""
    if m_irs < 1:
        raise ValueError("need at least one IRS element")
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, m_irs))


def _effective_channel(h: np.ndarray, g: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """BS-side row vector h^H diag(psi) G as a length-N array."""
    h = np.asarray(h)
    g = np.asarray(g)
    psi = np.asarray(psi)
    if g.ndim != 2 or h.shape != (g.shape[0],) or psi.shape != (g.shape[0],):
        raise ValueError(f"incompatible shapes h{h.shape}, g{g.shape}, psi{psi.shape}")
    return (h.conj() * psi) @ g


def mrt_precoder(
    h: np.ndarray, g: np.ndarray, psi: np.ndarray, p_max: float
) -> np.ndarray:
    """Full-power precoder aligned with the conjugate effective channel."""
    if not (np.isfinite(p_max) and p_max > 0):
        raise ValueError("p_max must be positive")
    e = _effective_channel(h, g, psi)
    nrm = float(np.linalg.norm(e))
    if nrm == 0.0:
        raise ValueError("zero effective channel; precoder undefined")
    return np.sqrt(p_max) * e.conj() / nrm


def achievable_rate(
    h: np.ndarray, g: np.ndarray, psi: np.ndarray, f: np.ndarray, noise_var: float
) -> float:
    """Single-stream spectral efficiency log2(1 + |h^H diag(psi) G f|^2 / noise)."""
    if not (np.isfinite(noise_var) and noise_var > 0):
        raise ValueError("noise_var must be positive")
    e = _effective_channel(h, g, psi)
    f = np.asarray(f)
    if f.shape != (e.shape[0],):
        raise ValueError("precoder length must match the BS antenna count")
    power = float(np.abs(e @ f) ** 2)
    return float(np.log2(1.0 + power / noise_var))
