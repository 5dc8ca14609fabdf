"""Synthetic tracks bundled with the planner.

Each builtin track yields a centerline with constant half width, a reference raceline that follows the
centerline, and an occupancy grid rasterized around it. Generation is deterministic.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from src.errors import ConfigurationError
from src.geometry import Pose2D
from src.sim.grid import OccupancyGrid, save_map
from src.track.curvature import curvature_profile, heading_profile
from src.track.optimizer import speed_profile
from src.track.waypoints import Raceline, TrackCenterline, save_centerline, save_waypoints

logger = structlog.get_logger(__name__)

DENSE_SPACING = 0.01


@dataclass(frozen=True)
class TrackShape:
    half_width: float = 1.0
    spacing: float = 0.1
    resolution: float = 0.05
    margin: float = 1.0
    v_max: float = 2.0
    a_lat_max: float = 3.0


@dataclass(frozen=True)
class TrackAssets:
    name: str
    centerline: TrackCenterline
    raceline: Raceline
    grid: OccupancyGrid


@dataclass(frozen=True)
class TrackFiles:
    map_path: Path
    centerline_path: Path
    waypoints_path: Path


def _oval_curve(samples: int, straight: float = 8.0, radius: float = 3.0) -> NDArray[np.float64]:
    """Counter-clockwise stadium: bottom straight, right semicircle, top straight, left semicircle."""
    half = straight / 2.0
    perimeter = 2.0 * straight + 2.0 * math.pi * radius
    s = np.linspace(0.0, perimeter, samples, endpoint=False)
    points = np.empty((samples, 2))
    arc = math.pi * radius
    for i, si in enumerate(s):
        if si < straight:
            points[i] = (-half + si, -radius)
        elif si < straight + arc:
            phi = -math.pi / 2.0 + (si - straight) / radius
            points[i] = (half + radius * math.cos(phi), radius * math.sin(phi))
        elif si < 2.0 * straight + arc:
            points[i] = (half - (si - straight - arc), radius)
        else:
            phi = math.pi / 2.0 + (si - 2.0 * straight - arc) / radius
            points[i] = (-half + radius * math.cos(phi), radius * math.sin(phi))
    return points


def _squiggle_curve(samples: int, radius: float = 4.0, amplitude: float = 0.15, lobes: int = 3) -> NDArray[np.float64]:
    phi = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    r = radius * (1.0 + amplitude * np.sin(lobes * phi))
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


BUILTIN_TRACKS: dict[str, Callable[[int], NDArray[np.float64]]] = {
    "oval": _oval_curve,
    "squiggle": _squiggle_curve,
}


def _resample_closed(dense: NDArray[np.float64], spacing: float) -> NDArray[np.float64]:
    closed = np.vstack((dense, dense[:1]))
    seg = np.hypot(np.diff(closed[:, 0]), np.diff(closed[:, 1]))
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    count = max(3, int(round(arc[-1] / spacing)))
    targets = np.linspace(0.0, arc[-1], count, endpoint=False)
    return np.column_stack((np.interp(targets, arc, closed[:, 0]), np.interp(targets, arc, closed[:, 1])))


def rasterize(dense: NDArray[np.float64], half_width: float, resolution: float, margin: float) -> OccupancyGrid:
    """Cells whose centre lies within ``half_width`` of the curve are free; everything else is occupied."""
    lower = dense.min(axis=0) - half_width - margin
    upper = dense.max(axis=0) + half_width + margin
    width = int(math.ceil((upper[0] - lower[0]) / resolution))
    height = int(math.ceil((upper[1] - lower[1]) / resolution))
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    centers = np.column_stack(
        (lower[0] + (cols.ravel() + 0.5) * resolution, lower[1] + (rows.ravel() + 0.5) * resolution)
    )
    distance, _ = cKDTree(dense).query(centers)
    cells = (distance > half_width).reshape(height, width)
    return OccupancyGrid(cells=cells, resolution=resolution, origin=Pose2D(float(lower[0]), float(lower[1]), 0.0))


def reference_raceline(points: NDArray[np.float64], v_max: float, a_lat_max: float) -> Raceline:
    gamma = curvature_profile(points, closed=True)
    theta = heading_profile(points, closed=True)
    v = speed_profile(gamma, v_max, a_lat_max)
    return Raceline(np.column_stack((points, v, theta, gamma)), closed=True)


def build_track(name: str, shape: TrackShape | None = None) -> TrackAssets:
    shape = shape or TrackShape()
    try:
        curve = BUILTIN_TRACKS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown builtin track {name!r}; choose from {', '.join(sorted(BUILTIN_TRACKS))}", fields=["track.name"]
        ) from None

    # Dense polyline, then a uniform arc-length resample at the waypoint spacing.
    dense = curve(20_000)
    dense = _resample_closed(dense, DENSE_SPACING)
    centers = _resample_closed(dense, shape.spacing)

    widths = np.full(centers.shape[0], shape.half_width)
    centerline = TrackCenterline(centers, widths, widths.copy(), closed=True)
    raceline = reference_raceline(centers, shape.v_max, shape.a_lat_max)
    grid = rasterize(dense, shape.half_width, shape.resolution, shape.margin)

    logger.debug(
        "track_built",
        track=name,
        waypoints=len(raceline),
        perimeter=round(raceline.perimeter, 3),
        grid_width=grid.width,
        grid_height=grid.height,
    )
    return TrackAssets(name=name, centerline=centerline, raceline=raceline, grid=grid)


def write_track(assets: TrackAssets, directory: Path | str) -> TrackFiles:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = TrackFiles(
        map_path=directory / f"{assets.name}.pgm",
        centerline_path=directory / f"{assets.name}_centerline.csv",
        waypoints_path=directory / f"{assets.name}_waypoints.csv",
    )
    save_map(assets.grid, files.map_path)
    save_centerline(assets.centerline, files.centerline_path)
    save_waypoints(assets.raceline, files.waypoints_path)
    logger.info("track_written", track=assets.name, directory=str(directory))
    return files
