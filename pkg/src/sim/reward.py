from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike


@dataclass(frozen=True)
class RewardConfig:
    step_bonus: float = 100.0
    collision_penalty: float = 1000.0


def compute_reward(
    step_index_delta: int, offsets: ArrayLike, collided: bool, config: RewardConfig | None = None
) -> float:
    """Progress bonus per survived physics sub-step, minus the offset magnitude and the collision penalty."""
    config = config or RewardConfig()
    norm = float(np.linalg.norm(np.asarray(offsets, dtype=np.float64)))
    reward = config.step_bonus * step_index_delta - norm
    if collided:
        reward -= config.collision_penalty
    return reward
