"""Behavioral cloning toward the expert's offsets.

The expert is the tracking controller following the raw raceline, so its offsets are identically zero and the
imitation target reduces to pulling the squashed actor mean toward zero under an L1 loss.
"""

import numpy as np
import structlog
from numpy.typing import NDArray

from src.errors import DimensionError, NonFiniteLossError
from src.learn.buffer import RolloutBuffer
from src.learn.config import TrainConfig
from src.learn.mlp import MlpParams, backward, forward_with_cache
from src.learn.optim import Adam, clip_grad_norm
from src.learn.policy import PolicyParams, init_policy, sample_actions
from src.learn.trainer import (
    CheckpointCallback,
    CheckpointSchedule,
    TrainingResult,
    check_policy_fits,
    set_learning_rate,
)
from src.sim.episode import VecEnvironment

logger = structlog.get_logger(__name__)


def bc_loss_and_grad(
    policy: PolicyParams, observations: NDArray[np.float64], o_max: float
) -> tuple[float, MlpParams]:
    """Mean over the batch of sum_i |o_i| at the squashed actor mean, and its gradient w.r.t. the actor."""
    observations = np.asarray(observations, dtype=np.float64)
    if observations.ndim != 2 or observations.shape[0] == 0:
        raise DimensionError("bc batch", "non-empty (B, obs_dim) array", observations.shape)
    batch = observations.shape[0]
    mean, cache = forward_with_cache(policy.actor, observations)
    squashed = np.tanh(mean)
    offsets = o_max * squashed
    loss = float(np.abs(offsets).sum(axis=1).mean())
    grad_mean = np.sign(offsets) * o_max * (1.0 - squashed**2) / batch
    return loss, backward(policy.actor, observations, grad_mean, cache)


def bc_update(
    policy: PolicyParams,
    observations: NDArray[np.float64],
    optimizer: Adam,
    cfg: TrainConfig,
    o_max: float,
) -> tuple[PolicyParams, float]:
    """One clipped Adam step on the actor; returns the policy (updated in place) and the pre-step loss."""
    loss, grads = bc_loss_and_grad(policy, observations, o_max)
    if not np.isfinite(loss):
        raise NonFiniteLossError({"bc_loss": loss, "batch": int(observations.shape[0])})
    clipped, _ = clip_grad_norm(grads.parameters(), cfg.max_grad_norm)
    optimizer.step(policy.actor.parameters(), clipped)
    return policy, loss


def bc_train(
    envs: VecEnvironment,
    cfg: TrainConfig,
    policy: PolicyParams | None = None,
    on_checkpoint: CheckpointCallback | None = None,
    checkpoint_interval: int = 0,
) -> TrainingResult:
    """Roll out the current stochastic policy, then regress its offsets toward zero on what it visited."""
    rng = np.random.default_rng(cfg.seed)
    if policy is None:
        policy = init_policy(envs.observation_dim, envs.action_dim, rng, cfg.hidden_sizes)
    check_policy_fits(policy, envs)

    optimizer = Adam(learning_rate=cfg.learning_rate)
    buffer = RolloutBuffer(cfg.n_steps, len(envs), envs.observation_dim, envs.action_dim)
    schedule = CheckpointSchedule(on_checkpoint, checkpoint_interval)
    result = TrainingResult(policy=policy)
    minibatch_size = max(1, cfg.n_steps * len(envs) // cfg.num_minibatches)

    observations = envs.reset()
    for update in range(1, cfg.num_updates + 1):
        set_learning_rate(optimizer, cfg, update)
        buffer.reset()
        for _ in range(cfg.n_steps):
            sample = sample_actions(policy, observations, envs.o_max, rng=rng)
            step = envs.step(sample.offsets)
            buffer.add(observations, sample.pre_squash, sample.log_prob, step.rewards, sample.value, step.dones)
            observations = step.observations
            result.global_step += len(envs)
            for episode in step.finished:
                result.returns.append((result.global_step, episode.episodic_return))
            schedule.maybe_fire(policy, result.global_step)

        flat = buffer.observations[: buffer.position].reshape(-1, envs.observation_dim)
        losses = []
        for _ in range(cfg.update_epochs):
            for indices in buffer.minibatches(minibatch_size, rng):
                _, loss = bc_update(policy, flat[indices], optimizer, cfg, envs.o_max)
                losses.append(loss)

        mean_loss = float(np.mean(losses))
        result.losses.append({"step": float(result.global_step), "bc_loss": mean_loss})
        recent = [r for _, r in result.returns[-10:]]
        logger.info(
            "bc_update_done",
            update=update,
            step=result.global_step,
            bc_loss=round(mean_loss, 6),
            recent_return=round(float(np.mean(recent)), 3) if recent else None,
        )

    schedule.final(policy, result.global_step)
    return result
