"""Occupancy grid, lidar raycasting, body collision checks and obstacle placement.

Cell ``(row, col)`` covers world-frame grid coordinates ``[col, col + 1) x [row, row + 1)`` scaled by the
resolution and offset by the map origin. Row 0 is the bottom of the map.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from numpy.typing import NDArray

from src.errors import ObstaclePlacementError, TrackFormatError
from src.geometry import PolarScan, Pose2D
from src.sim.state import VehicleParams, VehicleState
from src.track.waypoints import Raceline

OCCUPIED_THRESHOLD = 128
BOUNDARY_EPS = 1e-9
DEFAULT_OBSTACLE_SIZE = 0.35


@dataclass(frozen=True)
class OccupancyGrid:
    cells: NDArray[np.bool_] = field(repr=False)
    resolution: float = 0.05
    origin: Pose2D = field(default_factory=Pose2D)

    def __post_init__(self) -> None:
        if self.resolution <= 0.0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        cells = np.array(self.cells, dtype=bool)
        if cells.ndim != 2:
            raise ValueError(f"cells must be 2-D, got shape {cells.shape}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    def to_grid(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """World points to continuous grid coordinates (column, row) in cell units."""
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        dx = points[..., 0] - self.origin.x
        dy = points[..., 1] - self.origin.y
        gx = (c * dx + s * dy) / self.resolution
        gy = (-s * dx + c * dy) / self.resolution
        return np.stack((gx, gy), axis=-1)

    def to_world(self, grid_points: NDArray[np.float64]) -> NDArray[np.float64]:
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        gx = grid_points[..., 0] * self.resolution
        gy = grid_points[..., 1] * self.resolution
        return np.stack((c * gx - s * gy + self.origin.x, s * gx + c * gy + self.origin.y), axis=-1)

    def occupied(self, cols: NDArray[np.int64], rows: NDArray[np.int64]) -> NDArray[np.bool_]:
        inside = (cols >= 0) & (cols < self.width) & (rows >= 0) & (rows < self.height)
        result = np.ones(np.shape(cols), dtype=bool)
        result[inside] = self.cells[rows[inside], cols[inside]]
        return result

    def cell_occupied(self, col: int, row: int) -> bool:
        if 0 <= col < self.width and 0 <= row < self.height:
            return bool(self.cells[row, col])
        return True

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.cells))


def load_map(image_path: Path | str) -> OccupancyGrid:
    image_path = Path(image_path)
    sidecar = image_path.with_suffix(".yaml")
    for path in (image_path, sidecar):
        if not path.is_file():
            raise TrackFormatError(path, "file not found")

    tokens: list[str] = []
    for line in image_path.read_text(encoding="ascii").splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise TrackFormatError(image_path, "expected plain PGM magic 'P2'", line=1)
    try:
        width, height, max_value = (int(token) for token in tokens[1:4])
        pixels = np.array([int(token) for token in tokens[4:]], dtype=np.int64)
    except ValueError as e:
        raise TrackFormatError(image_path, f"malformed PGM token ({e})") from e
    if pixels.size != width * height:
        raise TrackFormatError(image_path, f"expected {width * height} pixels, found {pixels.size}")
    if max_value != 255:
        pixels = pixels * 255 // max(max_value, 1)

    meta = yaml.safe_load(sidecar.read_text(encoding="utf-8")) or {}
    missing = [key for key in ("resolution", "origin_x", "origin_y", "origin_theta") if key not in meta]
    if missing:
        raise TrackFormatError(sidecar, f"missing keys {', '.join(missing)}")

    # Image rows run top to bottom; grid rows run bottom to top.
    image = pixels.reshape(height, width)[::-1]
    return OccupancyGrid(
        cells=image < OCCUPIED_THRESHOLD,
        resolution=float(meta["resolution"]),
        origin=Pose2D(float(meta["origin_x"]), float(meta["origin_y"]), float(meta["origin_theta"])),
    )


def save_map(grid: OccupancyGrid, image_path: Path | str) -> None:
    image_path = Path(image_path)
    image_path.parent.mkdir(parents=True, exist_ok=True)
    image = np.where(grid.cells[::-1], 0, 255)
    lines = ["P2", f"{grid.width} {grid.height}", "255"]
    lines.extend(" ".join(str(value) for value in row) for row in image)
    image_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    meta = {
        "resolution": float(grid.resolution),
        "origin_x": float(grid.origin.x),
        "origin_y": float(grid.origin.y),
        "origin_theta": float(grid.origin.theta),
    }
    image_path.with_suffix(".yaml").write_text(yaml.safe_dump(meta, sort_keys=False), encoding="utf-8")


def _cast_ray(grid: OccupancyGrid, gx: float, gy: float, dx: float, dy: float, max_cells: float) -> float:
    """Grid traversal from (gx, gy) along unit direction (dx, dy); distance in cell units to the first hit."""
    col, row = math.floor(gx), math.floor(gy)
    step_col = 1 if dx > 0.0 else -1
    step_row = 1 if dy > 0.0 else -1
    t_delta_x = abs(1.0 / dx) if dx != 0.0 else math.inf
    t_delta_y = abs(1.0 / dy) if dy != 0.0 else math.inf
    if dx > 0.0:
        t_max_x = (col + 1 - gx) / dx
    elif dx < 0.0:
        t_max_x = (gx - col) / -dx
    else:
        t_max_x = math.inf
    if dy > 0.0:
        t_max_y = (row + 1 - gy) / dy
    elif dy < 0.0:
        t_max_y = (gy - row) / -dy
    else:
        t_max_y = math.inf

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x += t_delta_x
            col += step_col
        else:
            t = t_max_y
            t_max_y += t_delta_y
            row += step_row
        if t >= max_cells:
            return max_cells
        if grid.cell_occupied(col, row):
            return t


def raycast(
    grid: OccupancyGrid, pose: Pose2D, beam_count: int, fov: float, range_max: float
) -> PolarScan:
    angle_min = -fov / 2.0
    angle_increment = fov / (beam_count - 1) if beam_count > 1 else 0.0

    start = grid.to_grid(pose.position)
    gx, gy = float(start[0]), float(start[1])
    if grid.cell_occupied(math.floor(gx), math.floor(gy)):
        return PolarScan(angle_min, angle_increment, np.zeros(beam_count))

    max_cells = range_max / grid.resolution
    ranges = np.empty(beam_count, dtype=np.float64)
    heading = pose.theta - grid.origin.theta
    for i in range(beam_count):
        angle = heading + angle_min + i * angle_increment
        ranges[i] = _cast_ray(grid, gx, gy, math.cos(angle), math.sin(angle), max_cells)
    ranges = np.minimum(ranges * grid.resolution, range_max)
    return PolarScan(angle_min, angle_increment, ranges)


def body_sample_points(state: VehicleState, params: VehicleParams, spacing: float) -> NDArray[np.float64]:
    """Points covering the body rectangle, edges included; the rectangle is centred half a wheelbase ahead of
    the rear axle."""
    n_long = max(2, math.ceil(params.body_length / spacing) + 1)
    n_lat = max(2, math.ceil(params.body_width / spacing) + 1)
    longitudinal = np.linspace(-params.body_length / 2.0, params.body_length / 2.0, n_long)
    lateral = np.linspace(-params.body_width / 2.0, params.body_width / 2.0, n_lat)
    lon, lat = np.meshgrid(longitudinal, lateral, indexing="ij")
    lon = lon.ravel() + params.wheelbase / 2.0
    lat = lat.ravel()
    c, s = math.cos(state.theta), math.sin(state.theta)
    return np.column_stack((state.x + c * lon - s * lat, state.y + s * lon + c * lat))


def check_collision(grid: OccupancyGrid, state: VehicleState, params: VehicleParams) -> bool:
    points = body_sample_points(state, params, grid.resolution / 2.0)
    g = grid.to_grid(points)
    # A point on a cell boundary touches both neighbouring cells (closed overlap).
    cols_lo = np.floor(g[:, 0] - BOUNDARY_EPS).astype(np.int64)
    cols_hi = np.floor(g[:, 0] + BOUNDARY_EPS).astype(np.int64)
    rows_lo = np.floor(g[:, 1] - BOUNDARY_EPS).astype(np.int64)
    rows_hi = np.floor(g[:, 1] + BOUNDARY_EPS).astype(np.int64)
    for cols in (cols_lo, cols_hi):
        for rows in (rows_lo, rows_hi):
            if np.any(grid.occupied(cols, rows)):
                return True
    return False


@dataclass(frozen=True)
class ObstacleSpec:
    waypoint_index: int
    lateral_shift: float = 0.0
    size: float = DEFAULT_OBSTACLE_SIZE


def obstacle_center(raceline: Raceline, spec: ObstacleSpec) -> NDArray[np.float64]:
    index = spec.waypoint_index % len(raceline)
    x, y, _, theta, _ = raceline.data[index]
    normal = np.array([-math.sin(theta), math.cos(theta)])
    return np.array([x, y]) + spec.lateral_shift * normal


def place_obstacles(grid: OccupancyGrid, raceline: Raceline, specs: list[ObstacleSpec]) -> OccupancyGrid:
    if not specs:
        return grid
    cells = np.array(grid.cells, dtype=bool)
    for index, spec in enumerate(specs):
        if spec.size <= 0.0:
            raise ObstaclePlacementError(index, f"size must be positive, got {spec.size}")
        center = grid.to_grid(obstacle_center(raceline, spec))
        n = max(1, int(round(spec.size / grid.resolution)))
        col0 = math.floor(center[0]) - n // 2
        row0 = math.floor(center[1]) - n // 2
        if col0 < 0 or row0 < 0 or col0 + n > grid.width or row0 + n > grid.height:
            raise ObstaclePlacementError(index, "footprint extends outside the map")
        cells[row0 : row0 + n, col0 : col0 + n] = True
    return OccupancyGrid(cells=cells, resolution=grid.resolution, origin=grid.origin)
