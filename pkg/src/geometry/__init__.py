from src.geometry.transforms import (
    CartesianScan,
    PolarScan,
    Pose2D,
    as_points,
    polar_to_cartesian,
    vehicle_to_world,
    world_to_vehicle,
    wrap_angle,
    wrap_angles,
)

__all__ = [
    "CartesianScan",
    "PolarScan",
    "Pose2D",
    "as_points",
    "polar_to_cartesian",
    "vehicle_to_world",
    "world_to_vehicle",
    "wrap_angle",
    "wrap_angles",
]
