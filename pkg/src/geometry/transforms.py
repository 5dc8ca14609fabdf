"""Planar poses and the rigid transforms shared by the planner, simulator and controllers.

Angles are wrapped to the half-open interval (-pi, pi]. Point sets are ``(n, 2)`` float arrays.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    # In-range values pass through untouched so wrapping is exactly idempotent.
    if -math.pi < theta <= math.pi:
        return float(theta)
    wrapped = math.pi - math.fmod(math.pi - theta, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    elif wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


def wrap_angles(theta: ArrayLike) -> NDArray[np.float64]:
    raw = np.asarray(theta, dtype=np.float64)
    wrapped = math.pi - np.mod(math.pi - raw, TWO_PI)
    wrapped = np.where(wrapped <= -math.pi, wrapped + TWO_PI, wrapped)
    return np.where((raw > -math.pi) & (raw <= math.pi), raw, wrapped)


def as_points(points: ArrayLike) -> NDArray[np.float64]:
    array = np.asarray(points, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, 2)
    if array.ndim != 2 or array.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) point array, got shape {array.shape}")
    return array


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def position(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class PolarScan:
    angle_min: float
    angle_increment: float
    ranges: NDArray[np.float64] = field(repr=False)

    @property
    def beam_count(self) -> int:
        return int(self.ranges.shape[0])

    @property
    def angles(self) -> NDArray[np.float64]:
        return self.angle_min + self.angle_increment * np.arange(self.beam_count, dtype=np.float64)


@dataclass(frozen=True)
class CartesianScan:
    points: NDArray[np.float64] = field(repr=False)


def polar_to_cartesian(scan: PolarScan) -> CartesianScan:
    angles = scan.angles
    ranges = np.asarray(scan.ranges, dtype=np.float64)
    points = np.column_stack((ranges * np.cos(angles), ranges * np.sin(angles)))
    return CartesianScan(points=points)


def world_to_vehicle(pose: Pose2D, points: ArrayLike) -> NDArray[np.float64]:
    world = as_points(points)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx = world[:, 0] - pose.x
    dy = world[:, 1] - pose.y
    return np.column_stack((c * dx + s * dy, -s * dx + c * dy))


def vehicle_to_world(pose: Pose2D, points: ArrayLike) -> NDArray[np.float64]:
    local = as_points(points)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return np.column_stack(
        (
            c * local[:, 0] - s * local[:, 1] + pose.x,
            s * local[:, 0] + c * local[:, 1] + pose.y,
        )
    )
