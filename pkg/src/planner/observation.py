from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from src.errors import DimensionError
from src.geometry import PolarScan, world_to_vehicle
from src.planner.horizon import Frame, HorizonTrajectory
from src.sim.state import VehicleState


@dataclass(frozen=True)
class ObservationConfig:
    beam_count: int = 108
    range_max: float = 10.0
    horizon: int = 10

    @property
    def size(self) -> int:
        return self.beam_count + 2 * self.horizon + 1


@dataclass(frozen=True)
class Observation:
    scan: NDArray[np.float64] = field(repr=False)
    local_horizon: NDArray[np.float64] = field(repr=False)
    speed: float

    def as_vector(self) -> NDArray[np.float64]:
        """Layout ``[scan | x0, y0, x1, y1, ... | speed]``."""
        return np.concatenate((self.scan, self.local_horizon, [self.speed]))

    def __len__(self) -> int:
        return int(self.scan.shape[0] + self.local_horizon.shape[0] + 1)


def build_observation(
    scan: PolarScan, t_h: HorizonTrajectory, state: VehicleState, cfg: ObservationConfig
) -> Observation:
    if scan.beam_count != cfg.beam_count:
        raise DimensionError("scan beams", cfg.beam_count, scan.beam_count)
    if len(t_h) != cfg.horizon:
        raise DimensionError("horizon points", cfg.horizon, len(t_h))
    normalized = np.clip(np.asarray(scan.ranges, dtype=np.float64) / cfg.range_max, 0.0, 1.0)
    local = t_h.points if t_h.frame is Frame.VEHICLE else world_to_vehicle(state.pose, t_h.points)
    observation = Observation(scan=normalized, local_horizon=local.ravel(), speed=float(state.v))
    if not np.all(np.isfinite(observation.as_vector())):
        raise ValueError("observation contains non-finite values")
    return observation
