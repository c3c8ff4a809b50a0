"""Monte Carlo sweep orchestration.

Each (grid point, trial) pair is an independent unit of work whose rng
substreams are keyed by the trial index alone (common random numbers across
grid points, see trial_rngs), so the result is a pure function of (config,
sweep name, master seed) no matter how many workers run the trials.
Wall-clock timings go to the logger only; the emitted rows carry a constant
placeholder so output files stay byte-stable.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beamforming import (
    SdrConfig,
    achievable_rate,
    gaussian_randomization,
    mrt_precoder,
    random_passive_baseline,
    reduce_ccm,
    sdr_phase_opt,
)
from .channel import ToeplitzStructureError, pathloss_scenario, sample_realization, true_ccm
from .config import ExperimentConfig
from .estimator import AdmmConfig, EstimatorError, estimate_ccm
from .metrics import rem_metric
from .training import build_sensing_matrix, noise_var_for_snr, simulate_frames

logger = logging.getLogger("irsccm.sweep")

SWEEP_NAMES = ("snr", "frames", "slots")

CSV_COLUMNS = (
    "sweep_name", "sweep_value", "snr_db", "t_frames", "j_slots",
    "rem_mean", "rem_se", "rate_est_mean", "rate_est_se",
    "rate_true_mean", "rate_true_se", "rate_rand_mean", "rate_rand_se",
    "failures", "wall_ms",
)

# exceptions that mark a single trial as failed instead of aborting the sweep
_TRIAL_FAILURES = (EstimatorError, ToeplitzStructureError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class GridPoint:
    sweep_name: str
    sweep_value: float
    snr_db: float
    t_frames: int
    j_slots: int


@dataclass(frozen=True)
class TrialRecord:
    rem: float
    rate_est: float
    rate_true: float
    rate_rand: float
    failed: bool
    error: str


@dataclass(frozen=True)
class SweepRow:
    sweep_name: str
    sweep_value: float
    snr_db: float
    t_frames: int
    j_slots: int
    rem_mean: float
    rem_se: float
    rate_est_mean: float
    rate_est_se: float
    rate_true_mean: float
    rate_true_se: float
    rate_rand_mean: float
    rate_rand_se: float
    failures: int
    wall_ms: float


@dataclass(frozen=True)
class SweepResult:
    sweep_name: str
    rows: tuple[SweepRow, ...]


def build_grid(cfg: ExperimentConfig, sweep_name: str) -> tuple[GridPoint, ...]:
    tr = cfg.training
    if sweep_name == "snr":
        return tuple(
            GridPoint("snr", s, s, tr.t_frames, tr.j_slots) for s in tr.snr_grid_db
        )
    if sweep_name == "frames":
        return tuple(
            GridPoint("frames", float(t), tr.snr_db, t, tr.j_slots)
            for t in tr.t_frames_grid
        )
    if sweep_name == "slots":
        return tuple(
            GridPoint("slots", float(j), tr.snr_db, tr.t_frames, j)
            for j in tr.j_slots_grid
        )
    raise ValueError(f"unknown sweep {sweep_name!r}; expected one of {SWEEP_NAMES}")


def trial_rngs(master_seed: int, trial_index: int):
    """Ten independent generators for the stages of one trial, in a fixed
    order: scenario, sensing, snr calibration, frames, rounding draws for
    the estimated and true designs, random phases, and one evaluation
    stream per method.

    Streams are keyed by trial index alone, not by grid point, so every grid
    point of a sweep sees the same scenarios: differences between grid
    points then reflect the swept variable rather than scenario luck."""
    root = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))
    return [np.random.default_rng(child) for child in root.spawn(10)]


def _mean_rate(paths, geom, psi, p_max, noise_var, n_draws, rng) -> float:
    total = 0.0
    for _ in range(n_draws):
        real = sample_realization(paths, geom, rng)
        f = mrt_precoder(real.irs_user, real.bs_irs, psi, p_max)
        total += achievable_rate(real.irs_user, real.bs_irs, psi, f, noise_var)
    return total / n_draws


def run_trial(
    cfg: ExperimentConfig, point: GridPoint, grid_index: int, trial_index: int
) -> TrialRecord:
    """One end-to-end trial: draw a scenario, train, estimate the CCM, design
    phases from the estimated / true / no statistics, evaluate mean rates."""
    sc, es, bf = cfg.scenario, cfg.estimator, cfg.beamforming
    geom = sc.geometry
    rngs = trial_rngs(cfg.master_seed, trial_index)
    try:
        paths = pathloss_scenario(
            sc.bs_position, sc.irs_position, sc.user_position, sc.rician_db,
            rngs[0], n_bs_irs_paths=sc.n_bs_irs_paths,
            n_irs_user_paths=sc.n_irs_user_paths, shadow_std_db=sc.shadow_std_db,
        )
        truth = true_ccm(paths, geom)
        sensing = build_sensing_matrix(geom, point.j_slots, rngs[1])
        if cfg.training.noise_var is not None:
            noise_var = cfg.training.noise_var
        else:
            noise_var = noise_var_for_snr(
                paths, geom, sensing, point.snr_db, rngs[2],
                trials=cfg.training.snr_calibration_draws,
            )
        frames = simulate_frames(
            sensing, paths, geom, point.t_frames, noise_var, rngs[3]
        )
        admm = AdmmConfig(
            lam=es.lam, eta=es.eta, rho=es.rho,
            max_iters=es.max_iters, tol=es.tol, lambda_c=es.lambda_c,
        )
        est = estimate_ccm(
            frames.sample_cov, sensing.w, geom.dims, admm,
            t_frames=point.t_frames,
        )
        rem = rem_metric(truth.rh, est.rh_hat, cfg.rem_rank)

        sdr_cfg = SdrConfig(max_iters=bf.sdr_max_iters, tol=bf.sdr_tol)
        phases = {}
        for key, rbar, round_rng in (
            ("est", reduce_ccm(est.rh_hat, sc.n_bs), rngs[4]),
            ("true", reduce_ccm(truth.rh, sc.n_bs), rngs[5]),
        ):
            sol = sdr_phase_opt(rbar, sdr_cfg)
            phases[key] = gaussian_randomization(
                sol.v_relaxed, rbar, bf.n_randomizations, round_rng
            ).psi
        phases["rand"] = random_passive_baseline(geom.m_irs, rngs[6])

        means = {
            key: _mean_rate(
                paths, geom, phases[key], bf.p_max, noise_var,
                bf.eval_realizations, rngs[7 + slot],
            )
            for slot, key in enumerate(("est", "true", "rand"))
        }
        return TrialRecord(
            rem=rem, rate_est=means["est"], rate_true=means["true"],
            rate_rand=means["rand"], failed=False, error="",
        )
    except _TRIAL_FAILURES as exc:
        logger.warning(
            "trial failed (grid %d, trial %d): %s", grid_index, trial_index, exc
        )
        return TrialRecord(
            rem=math.nan, rate_est=math.nan, rate_true=math.nan,
            rate_rand=math.nan, failed=True, error=str(exc),
        )


def _mean_se(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    if len(values) == 1:
        return values[0], 0.0
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(len(arr)))


def _aggregate(point: GridPoint, records: list[TrialRecord]) -> SweepRow:
    ok = [r for r in records if not r.failed]
    rem_mean, rem_se = _mean_se([r.rem for r in ok])
    est_mean, est_se = _mean_se([r.rate_est for r in ok])
    true_mean, true_se = _mean_se([r.rate_true for r in ok])
    rand_mean, rand_se = _mean_se([r.rate_rand for r in ok])
    return SweepRow(
        sweep_name=point.sweep_name, sweep_value=point.sweep_value,
        snr_db=point.snr_db, t_frames=point.t_frames, j_slots=point.j_slots,
        rem_mean=rem_mean, rem_se=rem_se,
        rate_est_mean=est_mean, rate_est_se=est_se,
        rate_true_mean=true_mean, rate_true_se=true_se,
        rate_rand_mean=rand_mean, rate_rand_se=rand_se,
        failures=len(records) - len(ok),
        wall_ms=0.0,
    )


def _trial_task(args) -> TrialRecord:
    cfg, point, grid_index, trial_index = args
    return run_trial(cfg, point, grid_index, trial_index)


def run_sweep(
    cfg: ExperimentConfig, sweep_name: str, threads: int = 1
) -> SweepResult:
    """Run the full grid; trials are independent and may run in a process
    pool, with records reduced in fixed (grid, trial) order either way."""
    if threads < 1:
        raise ValueError("threads must be at least 1")
    grid = build_grid(cfg, sweep_name)
    tasks = [
        (cfg, grid[gi], gi, ti)
        for gi in range(len(grid))
        for ti in range(cfg.trials)
    ]
    started = time.perf_counter()
    if threads == 1:
        records = [_trial_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_trial_task, tasks, chunksize=1))
    rows = tuple(
        _aggregate(grid[gi], records[gi * cfg.trials:(gi + 1) * cfg.trials])
        for gi in range(len(grid))
    )
    logger.info(
        "sweep %s: %d grid points x %d trials in %.1f s",
        sweep_name, len(grid), cfg.trials, time.perf_counter() - started,
    )
    return SweepResult(sweep_name=sweep_name, rows=rows)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("unexpected bool in CSV row")
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".9g")


def emit_csv(result: SweepResult, path: str | Path) -> Path:
    """Write one row per grid point with a fixed header, 9 significant
    digits, '.' decimals, and '\n' line endings regardless of platform."""
    path = Path(path)
    lines = [",".join(CSV_COLUMNS)]
    for row in result.rows:
        lines.append(",".join(_fmt(getattr(row, col)) for col in CSV_COLUMNS))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from None
    return path
