from src.sim.dynamics import actuator_rates, step_dynamics
from src.sim.grid import (
    ObstacleSpec,
    OccupancyGrid,
    check_collision,
    load_map,
    place_obstacles,
    raycast,
    save_map,
)
from src.sim.reward import RewardConfig, compute_reward
from src.sim.state import Action, VehicleParams, VehicleState, load_vehicle_params

__all__ = [
    "Action",
    "ObstacleSpec",
    "OccupancyGrid",
    "RewardConfig",
    "VehicleParams",
    "VehicleState",
    "actuator_rates",
    "check_collision",
    "compute_reward",
    "load_map",
    "load_vehicle_params",
    "place_obstacles",
    "raycast",
    "save_map",
    "step_dynamics",
]
