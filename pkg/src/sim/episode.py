"""Closed-loop episodes: sense, plan, control and integrate at the control rate with physics sub-steps."""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import structlog
from numpy.typing import NDArray
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from src.controllers.base import BaseController
from src.errors import ConfigurationError, TrackFormatError
from src.geometry import PolarScan
from src.learn.policy import PolicyParams
from src.planner.horizon import OffsetVector, PlanningConfig, apply_offsets, extract_horizon
from src.planner.observation import ObservationConfig, build_observation
from src.planner.step import plan_step
from src.sim.dynamics import step_dynamics
from src.sim.grid import OccupancyGrid, check_collision, raycast
from src.sim.reward import RewardConfig, compute_reward
from src.sim.state import Action, VehicleParams, VehicleState
from src.track.waypoints import Raceline, closest_waypoint, project_onto_raceline

logger = structlog.get_logger(__name__)

# Arc-length slack for "at the end" of an open raceline.
OPEN_END_TOLERANCE = 1e-6


@dataclass(frozen=True)
class SimConfig:
    physics_dt: float = 0.01
    control_dt: float = 0.1
    beam_count: int = 108
    fov: float = 4.7
    range_max: float = 10.0
    start_speed: float = 0.0
    max_steps: int = 1000
    randomize_start: bool = True
    start_index: int = 0
    start_attempts: int = 100

    def __post_init__(self) -> None:
        bad = [
            name
            for name in ("physics_dt", "control_dt", "fov", "range_max", "beam_count", "start_attempts")
            if not getattr(self, name) > 0
        ]
        if self.start_speed < 0.0:
            bad.append("start_speed")
        if self.max_steps < 0:
            bad.append("max_steps")
        if self.physics_dt > 0 and self.control_dt > 0:
            ratio = self.control_dt / self.physics_dt
            if abs(ratio - round(ratio)) > 1e-9:
                bad.append("control_dt")
        if bad:
            raise ConfigurationError("invalid simulator settings", fields=bad)

    @property
    def sub_steps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))


@dataclass
class StepOutcome:
    state: VehicleState
    scan: PolarScan = field(repr=False)
    collided: bool
    lap_completed: bool
    reward: float
    sub_steps: int = 0
    observation: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0), repr=False)
    truncated: bool = False
    cross_track_error: float = 0.0

    @property
    def done(self) -> bool:
        return self.collided or self.lap_completed or self.truncated


@dataclass(frozen=True)
class EpisodeRecord:
    t: float
    x: float
    y: float
    v: float
    theta: float
    delta: float
    reward: float
    collided: bool
    mean_abs_offset: float
    max_abs_offset: float
    cross_track_error: float


TRAJECTORY_COLUMNS = ["t", "x", "y", "v", "theta", "delta", "reward", "collided"]
METRIC_COLUMNS = ["t", "mean_abs_offset", "max_abs_offset", "cross_track_error"]


@dataclass
class EpisodeLog:
    records: list[EpisodeRecord] = field(default_factory=list)
    episodic_return: float = 0.0
    collided: bool = False
    lap_completed: bool = False

    @property
    def steps(self) -> int:
        return len(self.records)

    @property
    def max_abs_offset(self) -> float:
        return max((r.max_abs_offset for r in self.records), default=0.0)

    @property
    def mean_abs_offset(self) -> float:
        if not self.records:
            return 0.0
        return float(np.mean([r.mean_abs_offset for r in self.records]))

    def max_cross_track_error(self, after: float = 0.0) -> float:
        return max((r.cross_track_error for r in self.records if r.t >= after), default=0.0)


class _StartPoseBlocked(Exception):
    pass


class Environment:
    """One closed-loop simulation: a raceline, a map, a controller and the offset-planning layer."""

    def __init__(
        self,
        grid: OccupancyGrid,
        raceline: Raceline,
        params: VehicleParams,
        controller: BaseController,
        planning: PlanningConfig | None = None,
        sim: SimConfig | None = None,
        reward: RewardConfig | None = None,
        seed: int | None = None,
    ):
        self.grid = grid
        self.raceline = raceline
        self.params = params
        self.controller = controller
        self.planning = planning or PlanningConfig()
        self.sim = sim or SimConfig()
        self.reward_config = reward or RewardConfig()
        self.observation_config = ObservationConfig(
            beam_count=self.sim.beam_count, range_max=self.sim.range_max, horizon=self.planning.horizon
        )
        self.rng = np.random.default_rng(seed)
        self.state = VehicleState()
        self.step_count = 0
        self.progress = 0.0
        self._arc = 0.0
        self._observation = np.zeros(self.observation_config.size)

    @property
    def observation_dim(self) -> int:
        return self.observation_config.size

    @property
    def action_dim(self) -> int:
        return self.planning.horizon

    def _sample_start(self) -> VehicleState:
        n = len(self.raceline)
        index = int(self.rng.integers(n)) if self.sim.randomize_start else self.sim.start_index % n
        x, y, _, theta, _ = self.raceline.data[index]
        state = VehicleState(x=float(x), y=float(y), v=self.sim.start_speed, theta=float(theta))
        if check_collision(self.grid, state, self.params):
            raise _StartPoseBlocked(index)
        return state

    def reset(self, seed: int | None = None) -> NDArray[np.float64]:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        attempts = 1 if not self.sim.randomize_start else self.sim.start_attempts
        retrying = Retrying(
            stop=stop_after_attempt(attempts), retry=retry_if_exception_type(_StartPoseBlocked), reraise=False
        )
        try:
            self.state = retrying(self._sample_start)
        except RetryError as e:
            raise ConfigurationError(
                f"no collision-free start pose after {attempts} attempts", fields=["sim.start_index", "obstacles"]
            ) from e

        self.controller.reset()
        self.step_count = 0
        self.progress = 0.0
        self._arc, _ = project_onto_raceline(self.raceline, self.state.position)
        scan = raycast(self.grid, self.state.pose, self.sim.beam_count, self.sim.fov, self.sim.range_max)
        self._observation = self._observe(scan)
        return self._observation

    def _observe(self, scan: PolarScan) -> NDArray[np.float64]:
        t_h = extract_horizon(self.raceline, self.state, self.planning)
        return build_observation(scan, t_h, self.state, self.observation_config).as_vector()

    def _advance_progress(self) -> None:
        arc, _ = project_onto_raceline(self.raceline, self.state.position)
        delta = arc - self._arc
        if self.raceline.closed:
            perimeter = self.raceline.perimeter
            if delta > perimeter / 2.0:
                delta -= perimeter
            elif delta < -perimeter / 2.0:
                delta += perimeter
        self.progress += delta
        self._arc = arc

    def at_open_end(self) -> bool:
        """True once the vehicle projects onto the last point of an open raceline."""
        if self.raceline.closed:
            return False
        arc, _ = project_onto_raceline(self.raceline, self.state.position)
        return arc >= self.raceline.perimeter - OPEN_END_TOLERANCE

    def _finish_at_open_end(self, offsets: OffsetVector) -> StepOutcome:
        # Nothing left to track: the lap ends without running the controller.
        self.step_count += 1
        scan = raycast(self.grid, self.state.pose, self.sim.beam_count, self.sim.fov, self.sim.range_max)
        self._observation = self._observe(scan)
        _, cte = project_onto_raceline(self.raceline, self.state.position)
        logger.debug("open_end_reached", step=self.step_count)
        return StepOutcome(
            state=self.state,
            scan=scan,
            collided=False,
            lap_completed=True,
            reward=compute_reward(0, offsets.o, False, self.reward_config),
            sub_steps=0,
            observation=self._observation,
            cross_track_error=cte,
        )

    def step(self, offsets: OffsetVector | NDArray[np.float64]) -> StepOutcome:
        offsets = offsets if isinstance(offsets, OffsetVector) else OffsetVector(offsets)
        if self.at_open_end():
            return self._finish_at_open_end(offsets)
        t_h = extract_horizon(self.raceline, self.state, self.planning)
        t_m = apply_offsets(t_h, self.state, offsets)
        index, _ = closest_waypoint(self.raceline, self.state.position)
        action: Action = self.controller.control(self.state, t_m.points, float(self.raceline.speeds[index]))

        collided = False
        survived = 0
        for _ in range(self.sim.sub_steps):
            candidate = step_dynamics(self.state, action, self.params, self.sim.physics_dt)
            self.state = candidate
            if check_collision(self.grid, candidate, self.params):
                collided = True
                break
            survived += 1
            self._advance_progress()

        self.step_count += 1
        lap_completed = not collided and (self.progress >= self.raceline.perimeter or self.at_open_end())
        truncated = not (collided or lap_completed) and self.step_count >= self.sim.max_steps
        reward = compute_reward(survived, offsets.o, collided, self.reward_config)
        scan = raycast(self.grid, self.state.pose, self.sim.beam_count, self.sim.fov, self.sim.range_max)
        self._observation = self._observe(scan)
        _, cte = project_onto_raceline(self.raceline, self.state.position)

        logger.debug(
            "sim_step",
            step=self.step_count,
            reward=reward,
            collided=collided,
            progress=round(self.progress, 3),
        )
        return StepOutcome(
            state=self.state,
            scan=scan,
            collided=collided,
            lap_completed=lap_completed,
            reward=reward,
            sub_steps=survived,
            observation=self._observation,
            truncated=truncated,
            cross_track_error=cte,
        )


def run_episode(
    env: Environment,
    policy: PolicyParams | None = None,
    max_steps: int | None = None,
    deterministic: bool = True,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> EpisodeLog:
    """One episode from a fresh start pose. Without a policy the controller tracks the raw horizon."""
    limit = env.sim.max_steps if max_steps is None else max_steps
    log = EpisodeLog()
    if limit <= 0:
        return log
    observation = env.reset(seed=seed)
    zero = np.zeros(env.action_dim)
    for step in range(1, limit + 1):
        if policy is None:
            offsets = OffsetVector(zero)
        else:
            offsets, _ = plan_step(policy, observation, deterministic, env.planning.o_max, rng=rng)
        outcome = env.step(offsets)
        observation = outcome.observation
        abs_offsets = np.abs(offsets.o)
        log.records.append(
            EpisodeRecord(
                t=step * env.sim.control_dt,
                x=outcome.state.x,
                y=outcome.state.y,
                v=outcome.state.v,
                theta=outcome.state.theta,
                delta=outcome.state.delta,
                reward=outcome.reward,
                collided=outcome.collided,
                mean_abs_offset=float(np.mean(abs_offsets)),
                max_abs_offset=float(np.max(abs_offsets)),
                cross_track_error=outcome.cross_track_error,
            )
        )
        log.episodic_return += outcome.reward
        if outcome.collided or outcome.lap_completed:
            log.collided = outcome.collided
            log.lap_completed = outcome.lap_completed
            break

    logger.info(
        "episode_finished",
        steps=log.steps,
        episodic_return=round(log.episodic_return, 3),
        collided=log.collided,
        lap_completed=log.lap_completed,
    )
    return log


def metrics_path_for(path: Path | str) -> Path:
    """Per-step offset and tracking metrics live next to the trajectory file."""
    path = Path(path)
    return path.with_name(f"{path.stem}_metrics{path.suffix}")


def _format(value: float | bool) -> str:
    return str(int(value)) if isinstance(value, bool) else repr(float(value))


def _write_csv(path: Path, columns: list[str], rows: list[list[float | bool]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter=";", lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([_format(value) for value in row] for row in rows)


def _read_csv(path: Path, columns: list[str]) -> list[list[float]]:
    if not path.is_file():
        raise TrackFormatError(path, "file not found")
    rows = []
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter=";")
        if next(reader, None) != columns:
            raise TrackFormatError(path, f"expected header {';'.join(columns)}", line=1)
        for line_number, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise TrackFormatError(path, f"expected {len(columns)} fields", line=line_number)
            try:
                rows.append([float(v) for v in row])
            except ValueError as e:
                raise TrackFormatError(path, str(e), line=line_number) from e
    return rows


def write_trajectory_log(log: EpisodeLog, path: Path | str) -> Path:
    """``t;x;y;v;theta;delta;reward;collided`` per control step, plus the metrics file beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(
        path,
        TRAJECTORY_COLUMNS,
        [[r.t, r.x, r.y, r.v, r.theta, r.delta, r.reward, r.collided] for r in log.records],
    )
    _write_csv(
        metrics_path_for(path),
        METRIC_COLUMNS,
        [[r.t, r.mean_abs_offset, r.max_abs_offset, r.cross_track_error] for r in log.records],
    )
    return path


def read_trajectory_log(path: Path | str) -> list[EpisodeRecord]:
    """Trajectory rows joined with their metrics; without a metrics file the metric fields are NaN."""
    path = Path(path)
    rows = _read_csv(path, TRAJECTORY_COLUMNS)
    metrics_path = metrics_path_for(path)
    if metrics_path.is_file():
        metrics = _read_csv(metrics_path, METRIC_COLUMNS)
        if len(metrics) != len(rows):
            raise TrackFormatError(metrics_path, f"expected {len(rows)} rows, found {len(metrics)}")
    else:
        metrics = [[row[0], math.nan, math.nan, math.nan] for row in rows]
    return [
        EpisodeRecord(*row[:7], bool(row[7]), *extra[1:])  # type: ignore[arg-type]
        for row, extra in zip(rows, metrics)
    ]


@dataclass
class FinishedEpisode:
    env_index: int
    episodic_return: float
    length: int
    collided: bool
    lap_completed: bool


@dataclass
class VecStep:
    observations: NDArray[np.float64]
    rewards: NDArray[np.float64]
    dones: NDArray[np.float64]
    outcomes: list[StepOutcome]
    finished: list[FinishedEpisode]


class VecEnvironment:
    """Environments stepped in lockstep; a finished environment resets itself before returning."""

    def __init__(self, envs: list[Environment], workers: int = 1):
        if not envs:
            raise ConfigurationError("at least one environment is required", fields=["n_envs"])
        self.envs = envs
        self.workers = max(1, workers)
        self._returns = np.zeros(len(envs))
        self._lengths = np.zeros(len(envs), dtype=np.int64)
        self._executor = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None

    def __len__(self) -> int:
        return len(self.envs)

    @property
    def observation_dim(self) -> int:
        return self.envs[0].observation_dim

    @property
    def action_dim(self) -> int:
        return self.envs[0].action_dim

    @property
    def o_max(self) -> float:
        return self.envs[0].planning.o_max

    def reset(self) -> NDArray[np.float64]:
        self._returns[:] = 0.0
        self._lengths[:] = 0
        return np.stack([env.reset() for env in self.envs])

    def _step_one(self, item: tuple[Environment, NDArray[np.float64]]) -> StepOutcome:
        env, offsets = item
        return env.step(offsets)

    def step(self, offsets: NDArray[np.float64]) -> VecStep:
        offsets = np.asarray(offsets, dtype=np.float64)
        pairs = list(zip(self.envs, offsets))
        if self._executor is not None:
            outcomes = list(self._executor.map(self._step_one, pairs))
        else:
            outcomes = [self._step_one(pair) for pair in pairs]

        observations = np.empty((len(self.envs), self.observation_dim))
        rewards = np.array([o.reward for o in outcomes])
        dones = np.array([float(o.done) for o in outcomes])
        finished: list[FinishedEpisode] = []
        for i, (env, outcome) in enumerate(zip(self.envs, outcomes)):
            self._returns[i] += outcome.reward
            self._lengths[i] += 1
            if outcome.done:
                finished.append(
                    FinishedEpisode(
                        env_index=i,
                        episodic_return=float(self._returns[i]),
                        length=int(self._lengths[i]),
                        collided=outcome.collided,
                        lap_completed=outcome.lap_completed,
                    )
                )
                self._returns[i] = 0.0
                self._lengths[i] = 0
                observations[i] = env.reset()
            else:
                observations[i] = outcome.observation
        return VecStep(observations, rewards, dones, outcomes, finished)

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

