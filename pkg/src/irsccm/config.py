"""Experiment configuration.

TOML sections map onto frozen dataclasses; unknown sections or keys are
rejected by name so typos fail loudly. Defaults describe the desk-scale
setup (4-antenna BS, 8x8 IRS), small enough that a full sweep finishes in
minutes on one core.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .channel import ArrayGeometry
from .estimator import DEFAULT_LAMBDA_C


class ConfigError(Exception):
    """Invalid or unreadable experiment configuration."""


def _finite(x: float) -> bool:
    return x == x and abs(x) != float("inf")


def _as_position(value, name: str) -> tuple[float, float, float]:
    try:
        pos = tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of 3 coordinates") from None
    if len(pos) != 3 or not all(_finite(x) for x in pos):
        raise ConfigError(f"{name} must be a list of 3 finite coordinates")
    return pos


@dataclass(frozen=True)
class ScenarioConfig:
    """Site geometry and propagation statistics for one link."""

    bs_position: tuple[float, float, float] = (5.0, 0.0, 10.0)
    irs_position: tuple[float, float, float] = (0.0, 50.0, 20.0)
    user_position: tuple[float, float, float] = (10.0, 60.0, 1.8)
    rician_db: float = 10.0
    n_bs_irs_paths: int = 3
    n_irs_user_paths: int = 3
    shadow_std_db: float = 8.7
    n_bs: int = 4
    m_v: int = 8
    m_h: int = 8
    spacing_ratio: float = 0.5

    def __post_init__(self):
        for name in ("bs_position", "irs_position", "user_position"):
            object.__setattr__(self, name, _as_position(getattr(self, name), name))
        if self.n_bs_irs_paths < 1 or self.n_irs_user_paths < 1:
            raise ConfigError("path counts must be at least 1")
        if self.shadow_std_db < 0:
            raise ConfigError("shadow_std_db must be nonnegative")
        try:
            self.geometry
        except ValueError as exc:
            raise ConfigError(f"bad array geometry: {exc}") from None

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(
            n_bs=self.n_bs, m_v=self.m_v, m_h=self.m_h,
            spacing_ratio=self.spacing_ratio,
        )

    @property
    def n_composite(self) -> int:
        return self.n_bs_irs_paths * self.n_irs_user_paths


@dataclass(frozen=True)
class TrainingConfig:
    """Training design: fixed slot/frame/SNR values plus the sweep grids.

    noise_var, when set, bypasses the per-trial SNR calibration entirely.
    """

    j_slots: int = 60
    t_frames: int = 50
    snr_db: float = 0.0
    snr_grid_db: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0)
    t_frames_grid: tuple[int, ...] = (10, 25, 50, 100)
    j_slots_grid: tuple[int, ...] = (40, 50, 60, 70)
    snr_calibration_draws: int = 200
    noise_var: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(x) for x in self.snr_grid_db))
        object.__setattr__(self, "t_frames_grid", tuple(int(x) for x in self.t_frames_grid))
        object.__setattr__(self, "j_slots_grid", tuple(int(x) for x in self.j_slots_grid))
        if self.j_slots < 1 or self.t_frames < 1:
            raise ConfigError("j_slots and t_frames must be at least 1")
        for name in ("snr_grid_db", "t_frames_grid", "j_slots_grid"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be non-empty")
        if min(self.t_frames_grid) < 1 or min(self.j_slots_grid) < 1:
            raise ConfigError("sweep grids must contain positive counts")
        if self.snr_calibration_draws < 1:
            raise ConfigError("snr_calibration_draws must be at least 1")
        if self.noise_var is not None and not self.noise_var > 0:
            raise ConfigError("noise_var override must be positive")


@dataclass(frozen=True)
class EstimatorConfig:
    """Covariance estimator settings; lam=None selects the data-driven
    regularization with multiplier lambda_c."""

    lam: float | None = None
    lambda_c: float = DEFAULT_LAMBDA_C
    eta: float | None = None
    rho: float | None = None
    max_iters: int = 150
    tol: float = 1e-6

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lam must be nonnegative")
        if not self.lambda_c > 0:
            raise ConfigError("lambda_c must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")


@dataclass(frozen=True)
class BeamformingConfig:
    """Phase design and rate evaluation settings; rem_rank=0 means use the
    composite path count of the scenario."""

    p_max_dbm: float = 30.0
    n_randomizations: int = 200
    sdr_max_iters: int = 500
    sdr_tol: float = 1e-9
    eval_realizations: int = 200
    rem_rank: int = 0

    def __post_init__(self):
        if self.n_randomizations < 1:
            raise ConfigError("n_randomizations must be at least 1")
        if self.sdr_max_iters < 1:
            raise ConfigError("sdr_max_iters must be at least 1")
        if not self.sdr_tol > 0:
            raise ConfigError("sdr_tol must be positive")
        if self.eval_realizations < 1:
            raise ConfigError("eval_realizations must be at least 1")
        if self.rem_rank < 0:
            raise ConfigError("rem_rank must be nonnegative (0 = path count)")

    @property
    def p_max(self) -> float:
        """Transmit power budget in watts."""
        return 10.0 ** ((self.p_max_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    beamforming: BeamformingConfig = field(default_factory=BeamformingConfig)
    trials: int = 20
    master_seed: int = 20250801
    out: str = "results/sweep.csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must fit in an unsigned 64-bit int")

    @property
    def rem_rank(self) -> int:
        return self.beamforming.rem_rank or self.scenario.n_composite


_SECTIONS = {
    "scenario": ScenarioConfig,
    "training": TrainingConfig,
    "estimator": EstimatorConfig,
    "beamforming": BeamformingConfig,
}
_EXPERIMENT_KEYS = ("trials", "master_seed", "out")


def _build_section(cls, name: str, raw: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)} in [{name}]")
    try:
        return cls(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{name}] section: {exc}") from None


def config_from_mapping(data: dict) -> ExperimentConfig:
    data = dict(data)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        raw = data.pop(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{name}] must be a table")
        kwargs[name] = _build_section(cls, name, raw)
    exp = data.pop("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError("[experiment] must be a table")
    unknown = sorted(set(exp) - set(_EXPERIMENT_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)} in [experiment]")
    if data:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(data))}")
    try:
        return ExperimentConfig(**kwargs, **exp)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [experiment] section: {exc}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = tomllib.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return config_from_mapping(data)
