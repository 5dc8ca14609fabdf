import numpy as np
from numpy.typing import NDArray

from src.errors import DimensionError
from src.learn.policy import ActionSample, PolicyParams, sample_actions
from src.planner.horizon import OffsetVector
from src.planner.observation import Observation


def plan_step(
    policy: PolicyParams,
    observation: Observation | NDArray[np.float64],
    deterministic: bool,
    o_max: float,
    rng: np.random.Generator | None = None,
) -> tuple[OffsetVector, ActionSample]:
    """Offsets for one observation; the sample carries the pre-squash action, log probability and value."""
    vector = observation.as_vector() if isinstance(observation, Observation) else np.asarray(observation)
    if vector.shape != (policy.observation_dim,):
        raise DimensionError("observation", policy.observation_dim, vector.shape)
    sample = sample_actions(policy, vector, o_max, rng=rng, deterministic=deterministic)
    return OffsetVector(sample.offsets), sample
