from src.track.curvature import curvature_profile, heading_profile, menger_curvature
from src.track.optimizer import OptimizationResult, OptimizerConfig, optimize_min_curvature, speed_profile
from src.track.waypoints import (
    AlphaVector,
    Raceline,
    TrackCenterline,
    Waypoint,
    closest_waypoint,
    cross_track_error,
    load_centerline,
    load_waypoints,
    project_onto_raceline,
    resample_by_arclength,
    save_centerline,
    save_waypoints,
)

__all__ = [
    "AlphaVector",
    "OptimizationResult",
    "OptimizerConfig",
    "Raceline",
    "TrackCenterline",
    "Waypoint",
    "closest_waypoint",
    "cross_track_error",
    "curvature_profile",
    "heading_profile",
    "load_centerline",
    "load_waypoints",
    "menger_curvature",
    "optimize_min_curvature",
    "project_onto_raceline",
    "resample_by_arclength",
    "save_centerline",
    "save_waypoints",
    "speed_profile",
]
