from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray


def compute_gae(
    rewards: NDArray[np.float64],
    values: NDArray[np.float64],
    dones: NDArray[np.float64],
    last_value: NDArray[np.float64] | float,
    gamma: float,
    gae_lambda: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """GAE(lambda) over a time-major rollout; ``dones[t]`` marks transition ``t`` as the last of its episode.

    Works on ``(T,)`` or ``(T, n_envs)`` arrays. Returns ``(advantages, returns)`` with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.shape[0] == 0:
        raise ValueError("rollout is empty")
    advantages = np.zeros_like(rewards)
    last_gae = np.zeros_like(rewards[0])
    steps = rewards.shape[0]
    for t in range(steps - 1, -1, -1):
        next_value = np.asarray(last_value, dtype=np.float64) if t == steps - 1 else values[t + 1]
        next_non_terminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * next_non_terminal - values[t]
        last_gae = delta + gamma * gae_lambda * next_non_terminal * last_gae
        advantages[t] = last_gae
    return advantages, advantages + values


@dataclass
class RolloutBuffer:
    n_steps: int
    n_envs: int
    observation_dim: int
    action_dim: int
    observations: NDArray[np.float64] = field(init=False, repr=False)
    actions: NDArray[np.float64] = field(init=False, repr=False)
    log_probs: NDArray[np.float64] = field(init=False, repr=False)
    rewards: NDArray[np.float64] = field(init=False, repr=False)
    values: NDArray[np.float64] = field(init=False, repr=False)
    dones: NDArray[np.float64] = field(init=False, repr=False)
    advantages: NDArray[np.float64] | None = field(init=False, default=None, repr=False)
    returns: NDArray[np.float64] | None = field(init=False, default=None, repr=False)
    position: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        shape = (self.n_steps, self.n_envs)
        self.observations = np.zeros((*shape, self.observation_dim))
        self.actions = np.zeros((*shape, self.action_dim))
        self.log_probs = np.zeros(shape)
        self.rewards = np.zeros(shape)
        self.values = np.zeros(shape)
        self.dones = np.zeros(shape)
        self.advantages = None
        self.returns = None
        self.position = 0

    @property
    def full(self) -> bool:
        return self.position == self.n_steps

    def __len__(self) -> int:
        return self.position * self.n_envs

    def add(
        self,
        observations: NDArray[np.float64],
        actions: NDArray[np.float64],
        log_probs: NDArray[np.float64],
        rewards: NDArray[np.float64],
        values: NDArray[np.float64],
        dones: NDArray[np.float64],
    ) -> None:
        if self.full:
            raise IndexError("rollout buffer is full")
        t = self.position
        self.observations[t] = observations
        self.actions[t] = actions
        self.log_probs[t] = log_probs
        self.rewards[t] = rewards
        self.values[t] = values
        self.dones[t] = dones
        self.position += 1

    def compute_returns_and_advantage(
        self, last_values: NDArray[np.float64], gamma: float, gae_lambda: float
    ) -> None:
        t = self.position
        self.advantages, self.returns = compute_gae(
            self.rewards[:t], self.values[:t], self.dones[:t], last_values, gamma, gae_lambda
        )

    def flat(self, name: str) -> NDArray[np.float64]:
        array = getattr(self, name)
        if array is None:
            raise RuntimeError(f"{name} not computed; call compute_returns_and_advantage first")
        array = array[: self.position]
        return array.reshape(self.position * self.n_envs, *array.shape[2:])

    def minibatches(self, minibatch_size: int, rng: np.random.Generator) -> Iterator[NDArray[np.int64]]:
        """Shuffled index batches over the flattened rollout; the last batch may be short."""
        indices = rng.permutation(len(self))
        for start in range(0, len(indices), minibatch_size):
            yield indices[start : start + minibatch_size]
