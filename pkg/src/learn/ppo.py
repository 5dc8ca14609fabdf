"""Clipped-surrogate policy optimization over vectorized closed-loop rollouts."""

from dataclasses import asdict, dataclass

import numpy as np
import structlog
from numpy.typing import NDArray

from src.errors import NonFiniteLossError
from src.learn.buffer import RolloutBuffer
from src.learn.config import TrainConfig
from src.learn.mlp import backward, forward_with_cache
from src.learn.optim import Adam, clip_grad_norm
from src.learn.policy import (
    PolicyParams,
    fresh_critic,
    gaussian_logprob_and_entropy,
    init_policy,
    sample_actions,
    state_value,
)
from src.learn.trainer import (
    CheckpointCallback,
    CheckpointSchedule,
    TrainingResult,
    check_policy_fits,
    set_learning_rate,
)
from src.sim.episode import VecEnvironment

logger = structlog.get_logger(__name__)


def clipped_surrogate_objective(
    ratio: NDArray[np.float64], advantages: NDArray[np.float64], clip_eps: float
) -> NDArray[np.float64]:
    ratio = np.asarray(ratio, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    return np.minimum(ratio * advantages, clipped * advantages)


@dataclass
class PpoDiagnostics:
    actor_loss: float = 0.0
    critic_loss: float = 0.0
    entropy: float = 0.0
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    grad_norm: float = 0.0

    def as_row(self) -> dict[str, float]:
        return asdict(self)


def ppo_loss_and_grad(
    policy: PolicyParams,
    observations: NDArray[np.float64],
    actions: NDArray[np.float64],
    old_log_probs: NDArray[np.float64],
    advantages: NDArray[np.float64],
    returns: NDArray[np.float64],
    cfg: TrainConfig,
) -> tuple[float, list[NDArray[np.float64]], PpoDiagnostics]:
    """Total loss, gradients in ``policy.parameters()`` order, and minibatch diagnostics.

    loss = -mean(min(r A, clip(r) A)) + vf_coef * mean((V - R)^2) - ent_coef * entropy
    """
    batch = observations.shape[0]
    if cfg.normalize_advantages and batch > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    mean, actor_cache = forward_with_cache(policy.actor, observations)
    log_probs, entropy = gaussian_logprob_and_entropy(mean, policy.log_std, actions)
    log_ratio = log_probs - old_log_probs
    ratio = np.exp(log_ratio)
    surrogate = clipped_surrogate_objective(ratio, advantages, cfg.clip_eps)
    actor_loss = -float(surrogate.mean())

    values_out, critic_cache = forward_with_cache(policy.critic, observations)
    values = values_out[:, 0]
    critic_loss = float(np.mean((values - returns) ** 2))
    entropy_mean = float(entropy.mean())
    total = actor_loss + cfg.vf_coef * critic_loss - cfg.ent_coef * entropy_mean

    # The unclipped branch carries the gradient wherever it is the minimum, ties included.
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    active = (ratio * advantages <= clipped * advantages).astype(np.float64)
    grad_log_prob = -active * advantages * ratio / batch

    inv_var = np.exp(-2.0 * policy.log_std)
    diff = actions - mean
    grad_mean = grad_log_prob[:, None] * diff * inv_var
    grad_log_std = (grad_log_prob[:, None] * (diff**2 * inv_var - 1.0)).sum(axis=0) - cfg.ent_coef
    grad_values = cfg.vf_coef * 2.0 * (values - returns) / batch

    actor_grads = backward(policy.actor, observations, grad_mean, actor_cache)
    critic_grads = backward(policy.critic, observations, grad_values[:, None], critic_cache)
    grads = [*actor_grads.parameters(), grad_log_std, *critic_grads.parameters()]

    diagnostics = PpoDiagnostics(
        actor_loss=actor_loss,
        critic_loss=critic_loss,
        entropy=entropy_mean,
        approx_kl=float(np.mean((ratio - 1.0) - log_ratio)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps)),
    )
    return total, grads, diagnostics


def ppo_update(
    policy: PolicyParams,
    buffer: RolloutBuffer,
    optimizer: Adam,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[PolicyParams, PpoDiagnostics]:
    """``update_epochs`` passes of shuffled minibatches; diagnostics are averaged over every minibatch."""
    observations = buffer.flat("observations")
    actions = buffer.flat("actions")
    old_log_probs = buffer.flat("log_probs")
    advantages = buffer.flat("advantages")
    returns = buffer.flat("returns")
    minibatch_size = max(1, len(buffer) // cfg.num_minibatches)

    rows: list[PpoDiagnostics] = []
    for epoch in range(cfg.update_epochs):
        for indices in buffer.minibatches(minibatch_size, rng):
            total, grads, diagnostics = ppo_loss_and_grad(
                policy,
                observations[indices],
                actions[indices],
                old_log_probs[indices],
                advantages[indices],
                returns[indices],
                cfg,
            )
            if not np.isfinite(total):
                raise NonFiniteLossError({"epoch": epoch, "total_loss": total, **diagnostics.as_row()})
            clipped, norm = clip_grad_norm(grads, cfg.max_grad_norm)
            diagnostics.grad_norm = norm
            optimizer.step(policy.parameters(), clipped)
            rows.append(diagnostics)

    averaged = PpoDiagnostics(**{k: float(np.mean([getattr(r, k) for r in rows])) for k in asdict(rows[0])})
    return policy, averaged


def ppo_train(
    envs: VecEnvironment,
    cfg: TrainConfig,
    bootstrap: PolicyParams | None = None,
    on_checkpoint: CheckpointCallback | None = None,
    checkpoint_interval: int = 0,
) -> TrainingResult:
    """PPO from a cloned actor (critic re-initialized) or, without ``bootstrap``, from scratch."""
    rng = np.random.default_rng(cfg.seed)
    if bootstrap is not None:
        check_policy_fits(bootstrap, envs)
        policy = fresh_critic(bootstrap, rng)
    else:
        policy = init_policy(envs.observation_dim, envs.action_dim, rng, cfg.hidden_sizes)
    logger.info("ppo_start", bootstrapped=bootstrap is not None, updates=cfg.num_updates, n_envs=len(envs))

    optimizer = Adam(learning_rate=cfg.learning_rate)
    buffer = RolloutBuffer(cfg.n_steps, len(envs), envs.observation_dim, envs.action_dim)
    schedule = CheckpointSchedule(on_checkpoint, checkpoint_interval)
    result = TrainingResult(policy=policy)

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

        buffer.compute_returns_and_advantage(state_value(policy, observations), cfg.gamma, cfg.gae_lambda)
        _, diagnostics = ppo_update(policy, buffer, optimizer, cfg, rng)
        result.losses.append({"step": float(result.global_step), **diagnostics.as_row()})
        logger.info(
            "ppo_update_done",
            update=update,
            step=result.global_step,
            learning_rate=optimizer.learning_rate,
            **{k: round(v, 6) for k, v in diagnostics.as_row().items()},
        )

    schedule.final(policy, result.global_step)
    return result
