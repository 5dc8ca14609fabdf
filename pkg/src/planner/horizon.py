from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.errors import ConfigurationError, DimensionError
from src.geometry import as_points, vehicle_to_world, world_to_vehicle
from src.sim.state import VehicleState
from src.track.waypoints import Raceline, closest_waypoint, resample_by_arclength


class Frame(str, Enum):
    WORLD = "world"
    VEHICLE = "vehicle"


@dataclass(frozen=True)
class PlanningConfig:
    horizon: int = 10
    prediction_time: float = 1.0
    o_max: float = 1.0
    # Floor on the extracted arc so a stretch of zero reference speed still yields distinct points.
    min_lookahead: float = 0.5

    def __post_init__(self) -> None:
        if self.horizon < 2:
            raise ConfigurationError(f"horizon must be at least 2, got {self.horizon}", fields=["horizon"])
        if self.prediction_time <= 0.0:
            raise ConfigurationError("prediction_time must be positive", fields=["prediction_time"])
        if self.o_max <= 0.0:
            raise ConfigurationError("o_max must be positive", fields=["o_max"])
        if self.min_lookahead <= 0.0:
            raise ConfigurationError("min_lookahead must be positive", fields=["min_lookahead"])


@dataclass(frozen=True)
class HorizonTrajectory:
    points: NDArray[np.float64] = field(repr=False)
    frame: Frame = Frame.WORLD

    def __post_init__(self) -> None:
        points = as_points(self.points).copy()
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class OffsetVector:
    o: NDArray[np.float64] = field(repr=False)

    @classmethod
    def zeros(cls, horizon: int) -> "OffsetVector":
        return cls(np.zeros(horizon))

    def __post_init__(self) -> None:
        o = np.asarray(self.o, dtype=np.float64).ravel().copy()
        o.setflags(write=False)
        object.__setattr__(self, "o", o)

    def __len__(self) -> int:
        return int(self.o.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.o))


def lookahead_distance(raceline: Raceline, start_index: int, cfg: PlanningConfig) -> float:
    """Distance covered in ``prediction_time`` at the reference speeds, walking waypoint to waypoint."""
    n = len(raceline)
    speeds = raceline.speeds
    lengths = raceline.segment_lengths
    dt = cfg.prediction_time / cfg.horizon
    index = start_index
    offset = 0.0
    covered = 0.0
    for _ in range(cfg.horizon):
        remaining = speeds[index] * dt
        while remaining > 0.0:
            if not raceline.closed and index >= n - 1:
                remaining = 0.0
                break
            seg = lengths[index] - offset
            if remaining < seg:
                offset += remaining
                covered += remaining
                remaining = 0.0
            else:
                covered += seg
                remaining -= seg
                offset = 0.0
                index = (index + 1) % n if raceline.closed else index + 1
    return covered


def extract_horizon(raceline: Raceline, state: VehicleState, cfg: PlanningConfig) -> HorizonTrajectory:
    start, _ = closest_waypoint(raceline, state.position)
    length = max(lookahead_distance(raceline, start, cfg), cfg.min_lookahead)
    points = resample_by_arclength(raceline, start, length, cfg.horizon)
    return HorizonTrajectory(points, Frame.WORLD)


def apply_offsets(
    t_h: HorizonTrajectory, state: VehicleState, offsets: OffsetVector | ArrayLike
) -> HorizonTrajectory:
    """Shift every horizon point sideways in the vehicle frame and map it back to the world."""
    o = offsets.o if isinstance(offsets, OffsetVector) else np.asarray(offsets, dtype=np.float64).ravel()
    if t_h.frame is not Frame.WORLD:
        raise ValueError("apply_offsets expects a world-frame horizon")
    if o.shape[0] != len(t_h):
        raise DimensionError("offsets", len(t_h), o.shape[0])
    local = world_to_vehicle(state.pose, t_h.points)
    local[:, 1] += o
    return HorizonTrajectory(vehicle_to_world(state.pose, local), Frame.WORLD)


def to_vehicle_frame(t_h: HorizonTrajectory, state: VehicleState) -> HorizonTrajectory:
    if t_h.frame is Frame.VEHICLE:
        return t_h
    return HorizonTrajectory(world_to_vehicle(state.pose, t_h.points), Frame.VEHICLE)
