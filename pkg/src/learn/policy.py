import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from src.errors import DimensionError
from src.learn.mlp import MlpParams, forward, init_mlp

HIDDEN_SIZES = (256, 256, 256, 256)
ACTOR_OUTPUT_GAIN = 0.01
CRITIC_OUTPUT_GAIN = 1.0
LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class PolicyParams:
    actor: MlpParams
    log_std: NDArray[np.float64] = field(repr=False)
    critic: MlpParams

    def __post_init__(self) -> None:
        self.log_std = np.asarray(self.log_std, dtype=np.float64)
        if self.log_std.shape != (self.actor.output_dim,):
            raise DimensionError("log_std", (self.actor.output_dim,), self.log_std.shape)
        if not np.all(np.isfinite(self.log_std)):
            raise ValueError("log_std must be finite")
        if self.critic.input_dim != self.actor.input_dim:
            raise DimensionError("critic input", self.actor.input_dim, self.critic.input_dim)
        if self.critic.output_dim != 1:
            raise DimensionError("critic output", 1, self.critic.output_dim)

    @property
    def observation_dim(self) -> int:
        return self.actor.input_dim

    @property
    def action_dim(self) -> int:
        return self.actor.output_dim

    def parameters(self) -> list[NDArray[np.float64]]:
        """Actor arrays, then log_std, then critic arrays; the order gradients and checkpoints use."""
        return [*self.actor.parameters(), self.log_std, *self.critic.parameters()]

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.actor.copy(), self.log_std.copy(), self.critic.copy())


@dataclass
class ActionSample:
    offsets: NDArray[np.float64]
    pre_squash: NDArray[np.float64]
    log_prob: NDArray[np.float64]
    value: NDArray[np.float64]


def init_policy(
    observation_dim: int,
    action_dim: int,
    rng: np.random.Generator,
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES,
) -> PolicyParams:
    actor = init_mlp([observation_dim, *hidden_sizes, action_dim], rng, output_gain=ACTOR_OUTPUT_GAIN)
    critic = init_mlp([observation_dim, *hidden_sizes, 1], rng, output_gain=CRITIC_OUTPUT_GAIN)
    return PolicyParams(actor=actor, log_std=np.zeros(action_dim), critic=critic)


def fresh_critic(policy: PolicyParams, rng: np.random.Generator) -> PolicyParams:
    """Same actor and log_std with a newly initialized critic of the same shape."""
    sizes = [policy.critic.input_dim] + [shape[1] for shape in policy.critic.layer_shapes]
    critic = init_mlp(sizes, rng, output_gain=CRITIC_OUTPUT_GAIN)
    return PolicyParams(actor=policy.actor.copy(), log_std=policy.log_std.copy(), critic=critic)


def gaussian_logprob_and_entropy(
    mean: NDArray[np.float64], log_std: NDArray[np.float64], action: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Diagonal Gaussian log density of pre-squash ``action`` and the distribution entropy, summed over the
    last axis."""
    mean = np.asarray(mean, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    if mean.shape != action.shape or mean.shape[-1] != log_std.shape[-1]:
        raise DimensionError("gaussian inputs", mean.shape, (action.shape, log_std.shape))
    z = (action - mean) * np.exp(-log_std)
    log_prob = -0.5 * np.sum(z**2, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * LOG_2PI
    entropy = np.sum(log_std + 0.5 * (LOG_2PI + 1.0)) * np.ones(mean.shape[:-1])
    return log_prob, entropy


def squash(pre_squash: NDArray[np.float64], o_max: float) -> NDArray[np.float64]:
    return o_max * np.tanh(pre_squash)


def actor_mean(policy: PolicyParams, observations: NDArray[np.float64]) -> NDArray[np.float64]:
    return forward(policy.actor, observations)


def state_value(policy: PolicyParams, observations: NDArray[np.float64]) -> NDArray[np.float64]:
    out = forward(policy.critic, observations)
    return out[..., 0]


def sample_actions(
    policy: PolicyParams,
    observations: NDArray[np.float64],
    o_max: float,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> ActionSample:
    """Offsets for a single observation or a batch. Deterministic mode never touches ``rng``."""
    mean = actor_mean(policy, observations)
    if deterministic:
        pre = mean
    else:
        if rng is None:
            raise ValueError("stochastic sampling needs a random generator")
        pre = mean + np.exp(policy.log_std) * rng.standard_normal(mean.shape)
    log_prob, _ = gaussian_logprob_and_entropy(mean, policy.log_std, pre)
    return ActionSample(
        offsets=squash(pre, o_max),
        pre_squash=pre,
        log_prob=np.asarray(log_prob),
        value=np.asarray(state_value(policy, observations)),
    )
