from abc import ABC, abstractmethod
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from src.sim.state import Action, VehicleState


class ControllerKind(str, Enum):
    PURE_PURSUIT = "pure-pursuit"
    MPC = "mpc"


class BaseController(ABC):
    """Tracks a world-frame trajectory; one instance per episode."""

    name: str

    @abstractmethod
    def control(self, state: VehicleState, trajectory: NDArray[np.float64], reference_speed: float) -> Action:
        pass

    def reset(self) -> None:
        """Drop any state carried between control calls."""
