import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml
from numpy.typing import NDArray

from src.errors import ConfigurationError
from src.geometry import Pose2D, wrap_angle


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    v: float = 0.0
    theta: float = 0.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        if not all(math.isfinite(value) for value in (self.x, self.y, self.v, self.theta, self.delta)):
            raise ValueError(f"non-finite vehicle state {self}")

    @property
    def pose(self) -> Pose2D:
        return Pose2D(self.x, self.y, self.theta)

    @property
    def position(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y], dtype=np.float64)

    def as_vector(self) -> NDArray[np.float64]:
        """MPC ordering [x, y, v, theta]."""
        return np.array([self.x, self.y, self.v, self.theta], dtype=np.float64)


@dataclass(frozen=True)
class Action:
    delta_des: float
    v_des: float


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.33
    delta_max: float = 0.4189
    v_max: float = 2.0
    a_max: float = 3.0
    steer_rate_max: float = 3.2
    body_length: float = 0.58
    body_width: float = 0.31

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not value > 0.0:
                raise ConfigurationError("vehicle parameters must be positive", fields=[name])

    def clamp(self, action: Action) -> Action:
        return Action(
            delta_des=float(np.clip(action.delta_des, -self.delta_max, self.delta_max)),
            v_des=float(np.clip(action.v_des, 0.0, self.v_max)),
        )


def load_vehicle_params(path: Path | str) -> VehicleParams:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"vehicle config not found: {path}", fields=["vehicle"])
    raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    known = set(VehicleParams.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown vehicle parameters in {path}", fields=unknown)
    return VehicleParams(**{key: float(value) for key, value in raw.items()})
