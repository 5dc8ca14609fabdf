"""Experiment recipes: YAML files validated into pydantic models."""

from enum import Enum
from pathlib import Path
from typing import Annotated, Any

import yaml
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.config import settings
from src.controllers import ControllerKind, MpcConfig, PurePursuitConfig
from src.errors import ConfigurationError
from src.learn.config import TrainConfig
from src.planner.horizon import PlanningConfig
from src.sim.episode import SimConfig
from src.sim.grid import DEFAULT_OBSTACLE_SIZE, ObstacleSpec
from src.sim.reward import RewardConfig
from src.sim.state import VehicleParams, load_vehicle_params
from src.track.generator import BUILTIN_TRACKS, TrackShape


class Mode(str, Enum):
    BC_TRAIN = "bc-train"
    PPO_TRAIN = "ppo-train"
    EVAL = "eval"
    RACELINE = "raceline"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise ValueError(f"file not found: {path}")
    return path


ExistingFile = Annotated[Path, AfterValidator(_require_file)]


class TrackSection(_Section):
    """Either a builtin track by ``name`` or a map image plus waypoint CSV."""

    name: str | None = "oval"
    map: ExistingFile | None = None
    waypoints: ExistingFile | None = None
    centerline: ExistingFile | None = None
    closed: bool = True
    half_width: float = Field(1.0, gt=0)
    v_max: float = Field(2.0, gt=0)
    a_lat_max: float = Field(3.0, gt=0)

    @model_validator(mode="after")
    def _one_source(self) -> "TrackSection":
        if (self.map is None) != (self.waypoints is None):
            raise ValueError("map and waypoints must be given together")
        if self.map is None and self.name not in BUILTIN_TRACKS:
            raise ValueError(f"unknown builtin track {self.name!r}; choose from {', '.join(sorted(BUILTIN_TRACKS))}")
        return self

    @property
    def builtin(self) -> bool:
        return self.map is None

    def shape(self) -> TrackShape:
        return TrackShape(half_width=self.half_width, v_max=self.v_max, a_lat_max=self.a_lat_max)


class ControllerSection(_Section):
    kind: ControllerKind = ControllerKind.PURE_PURSUIT
    lookahead: float = Field(0.8, gt=0)
    speed: float = Field(2.0, gt=0)
    mpc_horizon: int = Field(10, ge=1)
    mpc_dt: float = Field(0.1, gt=0)

    def pure_pursuit(self) -> PurePursuitConfig:
        return PurePursuitConfig(lookahead=self.lookahead, speed=self.speed)

    def mpc(self, params: VehicleParams) -> MpcConfig:
        return MpcConfig.from_params(params, horizon=self.mpc_horizon, dt=self.mpc_dt)


class PlanningSection(_Section):
    horizon: int = Field(10, ge=2)
    prediction_time: float = Field(1.0, gt=0)
    o_max: float = Field(1.0, gt=0)

    def build(self) -> PlanningConfig:
        return PlanningConfig(horizon=self.horizon, prediction_time=self.prediction_time, o_max=self.o_max)


class SimSection(_Section):
    physics_dt: float = Field(0.01, gt=0)
    control_dt: float = Field(0.1, gt=0)
    beam_count: int = Field(108, ge=2)
    fov: float = Field(4.7, gt=0)
    range_max: float = Field(10.0, gt=0)
    start_speed: float = Field(0.0, ge=0)
    max_steps: int = Field(600, ge=0)
    randomize_start: bool = True
    start_index: int = Field(0, ge=0)

    def build(self) -> SimConfig:
        return SimConfig(**self.model_dump())


class RewardSection(_Section):
    step_bonus: float = 100.0
    collision_penalty: float = Field(1000.0, ge=0)

    def build(self) -> RewardConfig:
        return RewardConfig(**self.model_dump())


class TrainSection(_Section):
    learning_rate: float = Field(3e-4, gt=0)
    gamma: float = Field(0.99, gt=0, le=1)
    gae_lambda: float = Field(0.95, gt=0, le=1)
    clip_eps: float = Field(0.2, gt=0, lt=1)
    max_grad_norm: float = Field(0.5, gt=0)
    update_epochs: int = Field(4, ge=1)
    num_minibatches: int = Field(4, ge=1)
    n_envs: int = Field(4, ge=1)
    n_steps: int = Field(128, ge=1)
    total_timesteps: int = Field(50_000, ge=1)
    vf_coef: float = Field(0.5, ge=0)
    ent_coef: float = Field(0.0, ge=0)
    normalize_advantages: bool = True
    anneal_lr: bool = False
    hidden_sizes: list[int] = Field(default_factory=lambda: [256, 256, 256, 256], min_length=1)
    bootstrap: bool = True
    bootstrap_checkpoint: ExistingFile | None = None
    checkpoint_interval: int = Field(default_factory=lambda: settings.checkpoint_interval, ge=0)

    def build(self, seed: int) -> TrainConfig:
        fields = self.model_dump(exclude={"bootstrap", "bootstrap_checkpoint", "checkpoint_interval"})
        fields["hidden_sizes"] = tuple(fields["hidden_sizes"])
        return TrainConfig(seed=seed, **fields)


class ObstacleSection(_Section):
    waypoint_index: int = Field(ge=0)
    lateral_shift: float = 0.0
    size: float = Field(DEFAULT_OBSTACLE_SIZE, gt=0)

    def build(self) -> ObstacleSpec:
        return ObstacleSpec(self.waypoint_index, self.lateral_shift, self.size)


class EvalSection(_Section):
    episodes: int = Field(10, ge=1)
    checkpoint: ExistingFile | None = None
    max_steps: int | None = Field(None, ge=0)


class RacelineSection(_Section):
    output: Path | None = None
    max_iterations: int = Field(5000, ge=1)


class ExperimentConfig(_Section):
    name: str = Field(min_length=1)
    mode: Mode
    seed: int = 0
    output_dir: Path | None = None
    vehicle: ExistingFile | None = None
    track: TrackSection = Field(default_factory=TrackSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    planning: PlanningSection = Field(default_factory=PlanningSection)
    sim: SimSection = Field(default_factory=SimSection)
    reward: RewardSection = Field(default_factory=RewardSection)
    train: TrainSection = Field(default_factory=TrainSection)
    obstacles: list[ObstacleSection] = Field(default_factory=list)
    eval: EvalSection = Field(default_factory=EvalSection)
    raceline: RacelineSection = Field(default_factory=RacelineSection)

    @model_validator(mode="after")
    def _mode_requirements(self) -> "ExperimentConfig":
        if self.mode is Mode.PPO_TRAIN and self.train.bootstrap and self.train.bootstrap_checkpoint is None:
            raise ValueError("ppo-train needs train.bootstrap_checkpoint unless train.bootstrap is false")
        if self.mode is Mode.RACELINE and not self.track.builtin and self.track.centerline is None:
            raise ValueError("raceline mode on a custom map needs track.centerline")
        return self

    @property
    def resolved_output_dir(self) -> Path:
        if self.output_dir is None:
            return settings.output_root / self.name
        if self.output_dir.is_absolute():
            return self.output_dir
        return settings.output_root / self.output_dir

    def vehicle_params(self) -> VehicleParams:
        path = self.vehicle or settings.vehicle_config
        return load_vehicle_params(path) if path.is_file() else VehicleParams()


def _field_path(loc: tuple[int | str, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def validate_experiment(raw: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        details = "; ".join(f"{_field_path(err['loc'])}: {err['msg']}" for err in e.errors())
        fields = sorted({_field_path(err["loc"]) for err in e.errors()})
        raise ConfigurationError(f"invalid experiment config: {details}", fields=fields) from e


def load_experiment_config(path: Path | str, seed: int | None = None) -> ExperimentConfig:
    """Read a recipe; ``seed`` overrides the recipe's seed."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"experiment config not found: {path}", fields=["config"])
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path}: not valid YAML ({e})", fields=["config"]) from e
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a mapping at the top level", fields=["config"])
    if seed is not None:
        raw["seed"] = seed
    return validate_experiment(raw)


def dump_experiment_config(config: ExperimentConfig, path: Path | str) -> Path:
    """Write the fully resolved recipe; loading it back reproduces the run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = config.model_dump(mode="json")
    path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
    return path
