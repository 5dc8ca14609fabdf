import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.errors import TrackFormatError, TrackValidationError
from src.geometry import as_points, wrap_angles

WAYPOINT_HEADER = ["x", "y", "v", "theta", "gamma"]
CENTERLINE_HEADER = ["x", "y", "w_left", "w_right"]
MIN_SPACING = 1e-6


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    v: float
    theta: float
    gamma: float


@dataclass(frozen=True)
class Raceline:
    data: NDArray[np.float64] = field(repr=False)
    closed: bool = True

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != 5:
            raise TrackValidationError("waypoints", f"expected (n, 5) rows, got shape {data.shape}")
        minimum = 3 if self.closed else 2
        if data.shape[0] < minimum:
            raise TrackValidationError("waypoints", f"need at least {minimum} points, got {data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise TrackValidationError("waypoints", "non-finite values")
        if np.any(data[:, 2] < 0.0):
            row = int(np.argmax(data[:, 2] < 0.0))
            raise TrackValidationError("v", f"negative speed at waypoint {row}")
        spacing = _segment_lengths(data[:, :2], self.closed)
        if np.any(spacing <= MIN_SPACING):
            row = int(np.argmax(spacing <= MIN_SPACING))
            raise TrackValidationError("x,y", f"waypoint {row} repeats its successor")
        data[:, 3] = wrap_angles(data[:, 3])
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_waypoints(cls, waypoints: list[Waypoint], closed: bool = True) -> "Raceline":
        rows = [[w.x, w.y, w.v, w.theta, w.gamma] for w in waypoints]
        return cls(np.array(rows, dtype=np.float64).reshape(-1, 5), closed=closed)

    def __len__(self) -> int:
        return int(self.data.shape[0])

    @property
    def waypoints(self) -> list[Waypoint]:
        return [Waypoint(*map(float, row)) for row in self.data]

    @property
    def xy(self) -> NDArray[np.float64]:
        return self.data[:, :2]

    @property
    def speeds(self) -> NDArray[np.float64]:
        return self.data[:, 2]

    @property
    def headings(self) -> NDArray[np.float64]:
        return self.data[:, 3]

    @property
    def curvatures(self) -> NDArray[np.float64]:
        return self.data[:, 4]

    @property
    def segment_lengths(self) -> NDArray[np.float64]:
        return _segment_lengths(self.xy, self.closed)

    @property
    def cumulative_length(self) -> NDArray[np.float64]:
        """Arc length at each waypoint measured from waypoint 0."""
        return np.concatenate(([0.0], np.cumsum(self.segment_lengths)))[: len(self)]

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.segment_lengths))


@dataclass(frozen=True)
class TrackCenterline:
    centers: NDArray[np.float64] = field(repr=False)
    half_width_left: NDArray[np.float64] = field(repr=False)
    half_width_right: NDArray[np.float64] = field(repr=False)
    closed: bool = True

    def __post_init__(self) -> None:
        centers = as_points(self.centers)
        left = np.asarray(self.half_width_left, dtype=np.float64)
        right = np.asarray(self.half_width_right, dtype=np.float64)
        n = centers.shape[0]
        if left.shape != (n,) or right.shape != (n,):
            raise TrackValidationError("half_width", f"expected {n} widths per side")
        if np.any(left <= 0.0) or np.any(right <= 0.0):
            raise TrackValidationError("half_width", "half widths must be positive")
        if n < 3:
            raise TrackValidationError("centers", f"need at least 3 points, got {n}")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "half_width_left", left)
        object.__setattr__(self, "half_width_right", right)

    def __len__(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True)
class AlphaVector:
    alpha: NDArray[np.float64] = field(repr=False)


def _segment_lengths(xy: NDArray[np.float64], closed: bool) -> NDArray[np.float64]:
    nxt = np.roll(xy, -1, axis=0) if closed else xy[1:]
    cur = xy if closed else xy[:-1]
    return np.hypot(nxt[:, 0] - cur[:, 0], nxt[:, 1] - cur[:, 1])


def _read_rows(path: Path, header: list[str]) -> list[tuple[int, list[float]]]:
    if not path.is_file():
        raise TrackFormatError(path, "file not found")

    rows: list[tuple[int, list[float]]] = []
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle, delimiter=";")
        for line_no, row in enumerate(reader, start=1):
            if line_no == 1:
                if [cell.strip() for cell in row] != header:
                    raise TrackFormatError(path, f"expected header {';'.join(header)}", line=1)
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise TrackFormatError(path, f"expected {len(header)} fields, got {len(row)}", line=line_no)
            try:
                rows.append((line_no, [float(cell) for cell in row]))
            except ValueError as e:
                raise TrackFormatError(path, f"malformed number ({e})", line=line_no) from e
    return rows


def load_waypoints(path: Path | str, closed: bool = True) -> Raceline:
    path = Path(path)
    rows = _read_rows(path, WAYPOINT_HEADER)
    for line_no, values in rows:
        if values[2] < 0.0:
            raise TrackValidationError("v", f"negative speed {values[2]} at {path}:{line_no}")
    data = np.array([values for _, values in rows], dtype=np.float64).reshape(-1, 5)
    return Raceline(data, closed=closed)


def save_waypoints(raceline: Raceline, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter=";", lineterminator="\n")
        writer.writerow(WAYPOINT_HEADER)
        for row in raceline.data:
            writer.writerow([repr(float(value)) for value in row])


def load_centerline(path: Path | str, closed: bool = True) -> TrackCenterline:
    path = Path(path)
    rows = _read_rows(path, CENTERLINE_HEADER)
    data = np.array([values for _, values in rows], dtype=np.float64).reshape(-1, 4)
    return TrackCenterline(data[:, :2], data[:, 2], data[:, 3], closed=closed)


def save_centerline(track: TrackCenterline, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter=";", lineterminator="\n")
        writer.writerow(CENTERLINE_HEADER)
        for (x, y), left, right in zip(track.centers, track.half_width_left, track.half_width_right):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(left)), repr(float(right))])


def closest_waypoint(raceline: Raceline, position: ArrayLike) -> tuple[int, float]:
    point = np.asarray(position, dtype=np.float64).reshape(2)
    distances = np.hypot(raceline.xy[:, 0] - point[0], raceline.xy[:, 1] - point[1])
    # argmin returns the first minimum, which is the smallest-index tie-break.
    index = int(np.argmin(distances))
    return index, float(distances[index])


def _polyline_from(raceline: Raceline, start_index: int) -> NDArray[np.float64]:
    n = len(raceline)
    if raceline.closed:
        order = (np.arange(n + 1) + start_index) % n
        return raceline.xy[order]
    return raceline.xy[start_index:]


def resample_by_arclength(
    raceline: Raceline, start_index: int, length: float, count: int
) -> NDArray[np.float64]:
    if length <= 0.0:
        raise ValueError(f"length must be positive, got {length}")
    if count < 2:
        raise ValueError(f"count must be at least 2, got {count}")

    start_index = start_index % len(raceline)
    polyline = _polyline_from(raceline, start_index)
    if polyline.shape[0] < 2:
        return np.repeat(polyline[:1], count, axis=0)

    seg = np.hypot(np.diff(polyline[:, 0]), np.diff(polyline[:, 1]))
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = float(arc[-1])

    targets = np.linspace(0.0, length, count)
    if raceline.closed:
        targets = np.mod(targets, total)
    else:
        targets = np.minimum(targets, total)

    return np.column_stack((np.interp(targets, arc, polyline[:, 0]), np.interp(targets, arc, polyline[:, 1])))


def project_onto_raceline(raceline: Raceline, position: ArrayLike) -> tuple[float, float]:
    """Arc-length coordinate and distance of the closest point on the piecewise-linear raceline."""
    point = np.asarray(position, dtype=np.float64).reshape(2)
    index, _ = closest_waypoint(raceline, point)
    n = len(raceline)
    cumulative = raceline.cumulative_length
    lengths = raceline.segment_lengths

    candidates: list[int] = []
    if raceline.closed:
        candidates = [(index - 1) % n, index]
    else:
        candidates = [i for i in (index - 1, index) if 0 <= i < n - 1]

    best_s, best_d = float(cumulative[index]), float(np.hypot(*(raceline.xy[index] - point)))
    for seg in candidates:
        a = raceline.xy[seg]
        b = raceline.xy[(seg + 1) % n]
        ab = b - a
        t = float(np.clip(np.dot(point - a, ab) / np.dot(ab, ab), 0.0, 1.0))
        d = float(np.hypot(*(a + t * ab - point)))
        if d < best_d:
            best_d = d
            best_s = float(cumulative[seg] + t * lengths[seg])
    return best_s, best_d


def cross_track_error(raceline: Raceline, position: ArrayLike) -> float:
    return project_onto_raceline(raceline, position)[1]
