from src.planner.horizon import (
    Frame,
    HorizonTrajectory,
    OffsetVector,
    PlanningConfig,
    apply_offsets,
    extract_horizon,
    to_vehicle_frame,
)
from src.planner.observation import Observation, ObservationConfig, build_observation
from src.planner.step import plan_step

__all__ = [
    "Frame",
    "HorizonTrajectory",
    "Observation",
    "ObservationConfig",
    "OffsetVector",
    "PlanningConfig",
    "apply_offsets",
    "build_observation",
    "extract_horizon",
    "plan_step",
    "to_vehicle_frame",
]
