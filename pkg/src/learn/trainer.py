"""Pieces shared by the imitation and reinforcement trainers: results, checkpoint hooks and evaluation."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import structlog

from src.errors import DimensionError
from src.learn.config import TrainConfig
from src.learn.optim import Adam
from src.learn.policy import PolicyParams
from src.sim.episode import Environment, EpisodeLog, VecEnvironment, run_episode

logger = structlog.get_logger(__name__)

CheckpointCallback = Callable[[PolicyParams, int], None]


@dataclass
class TrainingResult:
    policy: PolicyParams
    returns: list[tuple[int, float]] = field(default_factory=list)
    losses: list[dict[str, float]] = field(default_factory=list)
    global_step: int = 0

    def moving_average(self, window: int) -> list[float]:
        values = [r for _, r in self.returns]
        return [float(np.mean(values[max(0, i + 1 - window) : i + 1])) for i in range(len(values))]


class CheckpointSchedule:
    """Fires the callback each time the step counter crosses a multiple of ``interval``."""

    def __init__(self, callback: CheckpointCallback | None, interval: int):
        self.callback = callback
        self.interval = interval
        self._next = interval
        self._last: int | None = None

    def maybe_fire(self, policy: PolicyParams, step: int) -> None:
        if self.callback is None or self.interval <= 0:
            return
        if step >= self._next:
            self.callback(policy, step)
            self._last = step
            while self._next <= step:
                self._next += self.interval

    def final(self, policy: PolicyParams, step: int) -> None:
        if self.callback is not None and step != self._last:
            self.callback(policy, step)
            self._last = step


def check_policy_fits(policy: PolicyParams, env: VecEnvironment | Environment) -> None:
    if policy.observation_dim != env.observation_dim:
        raise DimensionError("policy observation_dim", env.observation_dim, policy.observation_dim)
    if policy.action_dim != env.action_dim:
        raise DimensionError("policy action_dim", env.action_dim, policy.action_dim)


def set_learning_rate(optimizer: Adam, cfg: TrainConfig, update: int) -> None:
    if cfg.anneal_lr:
        frac = 1.0 - (update - 1) / cfg.num_updates
        optimizer.learning_rate = frac * cfg.learning_rate
    else:
        optimizer.learning_rate = cfg.learning_rate


@dataclass
class EvaluationSummary:
    logs: list[EpisodeLog] = field(repr=False)
    return_mean: float
    return_std: float
    completion_rate: float
    collision_rate: float
    max_abs_offset: float
    mean_abs_offset: float
    max_cross_track_error: float

    def as_row(self) -> dict[str, float]:
        return {
            "episodes": float(len(self.logs)),
            "return_mean": self.return_mean,
            "return_std": self.return_std,
            "completion_rate": self.completion_rate,
            "collision_rate": self.collision_rate,
            "max_abs_offset": self.max_abs_offset,
            "mean_abs_offset": self.mean_abs_offset,
            "max_cross_track_error": self.max_cross_track_error,
        }


def evaluate_policy(
    env: Environment,
    policy: PolicyParams | None,
    episodes: int,
    seed: int = 0,
    max_steps: int | None = None,
) -> EvaluationSummary:
    """Deterministic episodes; episode ``i`` starts from the pose drawn with seed ``seed + i``."""
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    if policy is not None:
        check_policy_fits(policy, env)
    logs = [run_episode(env, policy, max_steps=max_steps, deterministic=True, seed=seed + i) for i in range(episodes)]
    returns = np.array([log.episodic_return for log in logs])
    summary = EvaluationSummary(
        logs=logs,
        return_mean=float(returns.mean()),
        return_std=float(returns.std()),
        completion_rate=float(np.mean([log.lap_completed for log in logs])),
        collision_rate=float(np.mean([log.collided for log in logs])),
        max_abs_offset=max(log.max_abs_offset for log in logs),
        mean_abs_offset=float(np.mean([log.mean_abs_offset for log in logs])),
        max_cross_track_error=max(log.max_cross_track_error() for log in logs),
    )
    logger.info("evaluation_done", **summary.as_row())
    return summary
