"""Compressed training of the vectorized cascade channel.

Each training slot j applies a BS precoder f_j and an IRS phase vector
psi_j; the scalar observation is w_j @ vec(cascade) + noise with sensing row
w_j = kron(f_j, psi_j) (BS level slowest, matching the vectorization order).
The same J rows are reused across frames while the channel redraws each
frame, so the sample covariance of the J-vector observations converges to
W R W^H + noise_var * I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, PathSet, sample_realization


@dataclass(frozen=True)
class SensingMatrix:
    """Slot-wise sensing rows and the factors they are built from.

    Invariant: w[j] == kron(precoders[j], phase_vectors[j]) and the phase
    vector entries have unit modulus.
    """

    w: np.ndarray
    precoders: np.ndarray
    phase_vectors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        f = np.asarray(self.precoders, dtype=complex)
        psi = np.asarray(self.phase_vectors, dtype=complex)
        if w.ndim != 2 or f.ndim != 2 or psi.ndim != 2:
            raise ValueError("sensing matrix fields must be 2-D")
        j, nm = w.shape
        if f.shape[0] != j or psi.shape[0] != j or f.shape[1] * psi.shape[1] != nm:
            raise ValueError("factor shapes inconsistent with sensing rows")
        if not np.allclose(np.abs(psi), 1.0, atol=1e-12):
            raise ValueError("phase vector entries must have unit modulus")
        for row in range(j):
            recon = np.kron(f[row], psi[row])
            if np.max(np.abs(recon - w[row])) > 1e-12 * max(np.max(np.abs(w[row])), 1e-300):
                raise ValueError(f"row {row} does not factor as kron(precoder, phases)")
        for name, arr in (("w", w), ("precoders", f), ("phase_vectors", psi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def j_slots(self) -> int:
        return self.w.shape[0]


def build_sensing_matrix(
    geom: ArrayGeometry, j_slots: int, rng: np.random.Generator
) -> SensingMatrix:
    """Random training design: IRS phases i.i.d. uniform on [0, 2*pi), BS
    precoders i.i.d. complex Gaussian with expected unit norm. Draw order:
    phases, then precoder reals, then precoder imags."""
    if j_slots < 1:
        raise ValueError("need at least one training slot")
    m, n = geom.m_irs, geom.n_bs
    psi = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=(j_slots, m)))
    f_re = rng.standard_normal((j_slots, n))
    f_im = rng.standard_normal((j_slots, n))
    f = np.sqrt(1.0 / (2 * n)) * (f_re + 1j * f_im)
    w = np.empty((j_slots, n * m), dtype=complex)
    for j in range(j_slots):
        w[j] = np.kron(f[j], psi[j])
    return SensingMatrix(w=w, precoders=f, phase_vectors=psi)


@dataclass(frozen=True)
class TrainingOutput:
    """Stacked per-frame observations and their sample covariance."""

    frames: np.ndarray
    sample_cov: np.ndarray
    noise_var: float

    @property
    def t_frames(self) -> int:
        return self.frames.shape[0]


def simulate_frames(
    sensing: SensingMatrix,
    paths: PathSet,
    geom: ArrayGeometry,
    t_frames: int,
    noise_var: float,
    rng: np.random.Generator,
) -> TrainingOutput:
    """Draw t_frames independent channel realizations, observe each through
    the sensing rows plus white noise, and form the sample covariance
    (1/T) sum_t y_t y_t^H (exactly Hermitian by symmetrization)."""
    if t_frames < 1:
        raise ValueError("need at least one frame")
    if noise_var < 0 or not np.isfinite(noise_var):
        raise ValueError("noise_var must be finite and nonnegative")
    j = sensing.j_slots
    frames = np.empty((t_frames, j), dtype=complex)
    for t in range(t_frames):
        real = sample_realization(paths, geom, rng)
        y = sensing.w @ real.vec
        if noise_var > 0:
            noise = rng.standard_normal(j) + 1j * rng.standard_normal(j)
            y = y + np.sqrt(noise_var / 2) * noise
        frames[t] = y
    cov = (frames.T @ frames.conj()) / t_frames
    cov = (cov + cov.conj().T) / 2
    return TrainingOutput(frames=frames, sample_cov=cov, noise_var=float(noise_var))


def ideal_received_cov(
    sensing: SensingMatrix, rh: np.ndarray, noise_var: float
) -> np.ndarray:
    """Population covariance of the observations: W R W^H + noise_var I."""
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    w = sensing.w
    cov = w @ np.asarray(rh) @ w.conj().T
    cov = (cov + cov.conj().T) / 2
    return cov + noise_var * np.eye(sensing.j_slots)


def _mean_log_snr_db(
    paths: PathSet,
    geom: ArrayGeometry,
    sensing: SensingMatrix,
    rng: np.random.Generator,
    trials: int,
) -> float:
    """Monte Carlo mean of 10*log10(per-slot signal power) in dB."""
    if trials < 1:
        raise ValueError("need at least one Monte Carlo trial")
    j = sensing.j_slots
    vals = np.empty(trials)
    for t in range(trials):
        vec = sample_realization(paths, geom, rng).vec
        p = float(np.sum(np.abs(sensing.w @ vec) ** 2)) / j
        if p <= 0:
            raise ValueError("zero signal power draw; SNR undefined")
        vals[t] = 10.0 * np.log10(p)
    return float(vals.mean())


def snr_of(
    paths: PathSet,
    geom: ArrayGeometry,
    sensing: SensingMatrix,
    noise_var: float,
    rng: np.random.Generator,
    trials: int = 200,
) -> float:
    """Empirical training SNR in dB: mean over channel draws of
    10*log10(||W vec||^2 / (J * noise_var))."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive for an SNR")
    return _mean_log_snr_db(paths, geom, sensing, rng, trials) - 10.0 * np.log10(noise_var)


def noise_var_for_snr(
    paths: PathSet,
    geom: ArrayGeometry,
    sensing: SensingMatrix,
    target_snr_db: float,
    rng: np.random.Generator,
    trials: int = 200,
) -> float:
    """Noise variance whose empirical SNR matches the target in expectation
    over the Monte Carlo mean of the log signal power."""
    mean_db = _mean_log_snr_db(paths, geom, sensing, rng, trials)
    return float(10.0 ** ((mean_db - target_snr_db) / 10.0))
