"""Fast invariant suite behind the `selftest` subcommand.

Each check exercises one structural guarantee of the library on a small
fixed-seed instance; the whole suite runs in a few seconds.
"""

from __future__ import annotations

import numpy as np

from .beamforming import (
    achievable_rate,
    gaussian_randomization,
    mrt_precoder,
    reduce_ccm,
    sdr_phase_opt,
)
from .channel import ArrayGeometry, PathSet, sample_realization, true_ccm
from .estimator import AdmmConfig, estimate_ccm
from .metrics import rem_metric
from .toeplitz import (
    lag_index_sets,
    toeplitz_adjoint_average,
    toeplitz_d,
    transforming_matrix,
)
from .training import build_sensing_matrix, ideal_received_cov


def _geometry() -> ArrayGeometry:
    return ArrayGeometry(n_bs=2, m_v=2, m_h=2)


def _paths(seed: int, n_l: int = 2, n_p: int = 1) -> PathSet:
    rng = np.random.default_rng(seed)
    return PathSet(
        bs_irs_aod=rng.uniform(-np.pi / 2, np.pi / 2, n_l),
        bs_irs_elev=rng.uniform(0, np.pi, n_l),
        bs_irs_azim=rng.uniform(-np.pi, np.pi, n_l),
        bs_irs_var=rng.uniform(0.2, 1.0, n_l),
        irs_user_elev=rng.uniform(0, np.pi, n_p),
        irs_user_azim=rng.uniform(-np.pi, np.pi, n_p),
        irs_user_var=rng.uniform(0.2, 1.0, n_p),
    )


def _random_generator_tensor(rng) -> np.ndarray:
    gen = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
    return gen


def check_toeplitz_round_trip() -> bool:
    rng = np.random.default_rng(0)
    gen = _random_generator_tensor(rng)
    sets = lag_index_sets((2, 2, 2))
    back = toeplitz_adjoint_average(toeplitz_d(gen), sets)
    return bool(np.allclose(back, gen, rtol=1e-14, atol=0))


def check_lag_partition() -> bool:
    sets = lag_index_sets((2, 2, 2))
    return int(sets.counts.sum()) == 64 and sets.counts.min() >= 1


def check_transforming_identity() -> bool:
    rng = np.random.default_rng(1)
    gen = _random_generator_tensor(rng)
    w = rng.standard_normal((6, 8)) + 1j * rng.standard_normal((6, 8))
    wcheck = transforming_matrix(w, lag_index_sets((2, 2, 2)))
    lhs = wcheck @ gen.ravel()
    rhs = (w @ toeplitz_d(gen) @ w.conj().T).ravel(order="F")
    return bool(np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs))


def check_truth_ccm_structure() -> bool:
    truth = true_ccm(_paths(2), _geometry())
    rh = truth.rh
    if not np.allclose(rh, rh.conj().T):
        return False
    evals = np.linalg.eigvalsh(rh)
    if evals.min() < -1e-10 * np.trace(rh).real:
        return False
    rank = int((evals > 1e-10 * evals.max()).sum())
    return rank <= truth.rank


def check_empirical_covariance() -> bool:
    geom, paths = _geometry(), _paths(3)
    truth = true_ccm(paths, geom)
    rng = np.random.default_rng(4)
    acc = np.zeros_like(truth.rh)
    n = 4000
    for _ in range(n):
        vec = sample_realization(paths, geom, rng).vec
        acc += np.outer(vec, vec.conj())
    err = np.linalg.norm(acc / n - truth.rh) / np.linalg.norm(truth.rh)
    return err < 0.25


def check_noise_free_recovery() -> bool:
    geom, paths = _geometry(), _paths(5)
    truth = true_ccm(paths, geom)
    sensing = build_sensing_matrix(geom, 6, np.random.default_rng(6))
    ry = ideal_received_cov(sensing, truth.rh, 0.0)
    est = estimate_ccm(
        ry, sensing.w, geom.dims,
        AdmmConfig(lam=0.0, max_iters=4000, tol=1e-7),
    )
    err = np.linalg.norm(est.rh_hat - truth.rh) / np.linalg.norm(truth.rh)
    return err <= 0.05


def check_estimate_psd() -> bool:
    geom, paths = _geometry(), _paths(7)
    truth = true_ccm(paths, geom)
    sensing = build_sensing_matrix(geom, 6, np.random.default_rng(8))
    ry = ideal_received_cov(sensing, truth.rh, 0.1)
    est = estimate_ccm(
        ry, sensing.w, geom.dims, AdmmConfig(lam=0.0, max_iters=500, tol=1e-6)
    )
    evals = np.linalg.eigvalsh(est.rh_hat)
    return evals.min() >= -1e-10 * max(evals.max(), 1e-30)


def check_sdr_rank_one() -> bool:
    rng = np.random.default_rng(9)
    m = 5
    c = np.exp(1j * rng.uniform(0, 2 * np.pi, m))
    rbar = np.outer(c, c.conj())
    sol = sdr_phase_opt(rbar)
    ps = gaussian_randomization(sol.v_relaxed, rbar, 20, rng)
    return (
        abs(sol.value - m * m) <= 1e-6 * m * m
        and ps.achieved_value <= sol.value * (1 + 1e-8)
        and abs(ps.achieved_value - m * m) <= 1e-6 * m * m
    )


def check_phase_design_beats_random() -> bool:
    geom, paths = _geometry(), _paths(10)
    truth = true_ccm(paths, geom)
    rbar = reduce_ccm(truth.rh, geom.n_bs)
    rng = np.random.default_rng(11)
    sol = sdr_phase_opt(rbar)
    ps = gaussian_randomization(sol.v_relaxed, rbar, 100, rng)
    psi_rand = np.exp(1j * rng.uniform(0, 2 * np.pi, geom.m_irs))
    opt = ps.achieved_value
    rand = float(np.real(psi_rand @ rbar @ psi_rand.conj()))
    return opt >= rand


def check_mrt_formula() -> bool:
    rng = np.random.default_rng(12)
    geom, paths = _geometry(), _paths(13)
    real = sample_realization(paths, geom, rng)
    psi = np.exp(1j * rng.uniform(0, 2 * np.pi, geom.m_irs))
    f = mrt_precoder(real.irs_user, real.bs_irs, psi, 2.0)
    if abs(np.linalg.norm(f) ** 2 - 2.0) > 1e-9:
        return False
    e = (real.irs_user.conj() * psi) @ real.bs_irs
    expect = np.log2(1.0 + 2.0 * np.linalg.norm(e) ** 2 / 0.3)
    return abs(achievable_rate(real.irs_user, real.bs_irs, psi, f, 0.3) - expect) < 1e-9


def check_rem_identity() -> bool:
    truth = true_ccm(_paths(14), _geometry())
    return abs(rem_metric(truth.rh, truth.rh, 2) - 1.0) < 1e-10


CHECKS = (
    ("toeplitz round trip", check_toeplitz_round_trip),
    ("lag set partition", check_lag_partition),
    ("transforming matrix identity", check_transforming_identity),
    ("ground-truth covariance structure", check_truth_ccm_structure),
    ("empirical covariance agreement", check_empirical_covariance),
    ("noise-free covariance recovery", check_noise_free_recovery),
    ("estimate is PSD", check_estimate_psd),
    ("phase relaxation rank-one exactness", check_sdr_rank_one),
    ("designed phases beat random phases", check_phase_design_beats_random),
    ("precoder power and rate formula", check_mrt_formula),
    ("subspace metric identity", check_rem_identity),
)


def run_selftest(report=print) -> bool:
    """Run every check, reporting one PASS/FAIL line each; True if all pass."""
    all_ok = True
    for name, check in CHECKS:
        try:
            ok = bool(check())
        except Exception as exc:  # a crash is a failure, not an abort
            report(f"FAIL {name} (raised {type(exc).__name__}: {exc})")
            all_ok = False
            continue
        report(f"{'PASS' if ok else 'FAIL'} {name}")
        all_ok = all_ok and ok
    return all_ok
