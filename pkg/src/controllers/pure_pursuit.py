import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.controllers.base import BaseController
from src.errors import ConfigurationError, DimensionError
from src.geometry import as_points, world_to_vehicle
from src.sim.state import Action, VehicleParams, VehicleState


@dataclass(frozen=True)
class PurePursuitConfig:
    lookahead: float = 0.8
    speed: float = 2.0

    def __post_init__(self) -> None:
        if self.lookahead <= 0.0:
            raise ConfigurationError(f"lookahead must be positive, got {self.lookahead}", fields=["lookahead"])
        if self.speed < 0.0:
            raise ConfigurationError(f"speed must be non-negative, got {self.speed}", fields=["speed"])


def _segment_circle_exit(
    start: NDArray[np.float64], end: NDArray[np.float64], center: NDArray[np.float64], radius: float
) -> NDArray[np.float64]:
    """Point where the segment leaves the circle; the start is inside, the end on or outside."""
    d = end - start
    f = start - center
    a = float(d @ d)
    b = 2.0 * float(f @ d)
    c = float(f @ f) - radius * radius
    if a <= 0.0:
        return end
    disc = max(b * b - 4.0 * a * c, 0.0)
    t = (-b + math.sqrt(disc)) / (2.0 * a)
    return start + min(max(t, 0.0), 1.0) * d


def lookahead_point(
    position: NDArray[np.float64], trajectory: NDArray[np.float64], lookahead: float
) -> tuple[NDArray[np.float64], float]:
    """Lookahead target and its distance from ``position``.

    Walks forward from the closest trajectory point to the first point at least ``lookahead`` away and
    interpolates on the bracketing segment. Falls back to the final point when every point is nearer.
    """
    distances = np.hypot(trajectory[:, 0] - position[0], trajectory[:, 1] - position[1])
    start = int(np.argmin(distances))
    for j in range(start, len(trajectory)):
        if distances[j] >= lookahead:
            if j == start:
                return trajectory[j], float(distances[j])
            return _segment_circle_exit(trajectory[j - 1], trajectory[j], position, lookahead), lookahead
    return trajectory[-1], float(distances[-1])


def pure_pursuit_control(
    state: VehicleState, trajectory: ArrayLike, cfg: PurePursuitConfig, params: VehicleParams
) -> Action:
    points = np.asarray(trajectory, dtype=np.float64)
    if points.size == 0:
        raise DimensionError("trajectory", "at least one point", 0)
    points = as_points(points)

    target, distance = lookahead_point(state.position, points, cfg.lookahead)
    if distance <= 1e-9:
        return Action(delta_des=0.0, v_des=cfg.speed)

    e = float(world_to_vehicle(state.pose, target)[0, 1])
    gamma = 2.0 * abs(e) / (distance * distance)
    delta = math.copysign(math.atan(gamma * params.wheelbase), e) if e != 0.0 else 0.0
    return params.clamp(Action(delta_des=delta, v_des=cfg.speed))


class PurePursuitController(BaseController):
    name = "pure-pursuit"

    def __init__(self, config: PurePursuitConfig, params: VehicleParams):
        self.config = config
        self.params = params

    def control(self, state: VehicleState, trajectory: NDArray[np.float64], reference_speed: float) -> Action:
        # Pure pursuit runs at its own fixed speed.
        return pure_pursuit_control(state, trajectory, self.config, self.params)
