import math

import numpy as np
import pytest

from src.errors import ConfigurationError, OptimizerConvergenceError, TrackFormatError, TrackValidationError
from src.sim.grid import check_collision, load_map
from src.sim.state import VehicleParams, VehicleState
from src.track.curvature import curvature_profile, heading_profile
from src.track.generator import build_track, write_track
from src.track.optimizer import (
    OptimizerConfig,
    curvature_objective,
    curvature_objective_gradient,
    optimize_min_curvature,
    speed_profile,
    track_normals,
)
from src.track.waypoints import (
    Raceline,
    TrackCenterline,
    closest_waypoint,
    cross_track_error,
    load_centerline,
    load_waypoints,
    project_onto_raceline,
    resample_by_arclength,
    save_centerline,
    save_waypoints,
)
from tests.conftest import make_straight_raceline

SQUARE_CSV = "x;y;v;theta;gamma\n0;0;1;0;0\n2;0;1;1.5708;0\n2;2;1;3.1416;0\n0;2;1;-1.5708;0\n"


def make_circle(radius: float, n: int, clockwise: bool = False) -> np.ndarray:
    phi = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    if clockwise:
        phi = -phi
    return np.column_stack((radius * np.cos(phi), radius * np.sin(phi)))


def make_square() -> Raceline:
    xy = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
    return Raceline(np.column_stack((xy, np.ones(4), np.zeros(4), np.zeros(4))), closed=True)


def test_load_waypoints_square(tmp_path):
    path = tmp_path / "square.csv"
    path.write_text(SQUARE_CSV)

    raceline = load_waypoints(path)

    assert len(raceline) == 4
    assert raceline.perimeter == pytest.approx(8.0)


def test_load_waypoints_missing_file_names_path(tmp_path):
    path = tmp_path / "nope.csv"

    with pytest.raises(TrackFormatError, match="nope.csv"):
        load_waypoints(path)


def test_load_waypoints_negative_speed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(SQUARE_CSV.replace("2;0;1;", "2;0;-1;"))

    with pytest.raises(TrackValidationError) as exc:
        load_waypoints(path)

    assert exc.value.field == "v"


def test_load_waypoints_malformed_row_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(SQUARE_CSV.replace("2;2;1;3.1416;0", "2;2;oops;3.1416;0"))

    with pytest.raises(TrackFormatError) as exc:
        load_waypoints(path)

    assert exc.value.line == 4


def test_too_few_points_on_closed_track(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("x;y;v;theta;gamma\n0;0;1;0;0\n1;0;1;0;0\n")

    with pytest.raises(TrackValidationError):
        load_waypoints(path)


def test_repeated_point_rejected():
    data = np.array([[0, 0, 1, 0, 0], [0, 0, 1, 0, 0], [1, 0, 1, 0, 0]], dtype=float)

    with pytest.raises(TrackValidationError):
        Raceline(data, closed=False)


def test_waypoint_and_centerline_files_round_trip(tmp_path, oval):
    save_waypoints(oval.raceline, tmp_path / "w.csv")
    save_centerline(oval.centerline, tmp_path / "c.csv")

    raceline = load_waypoints(tmp_path / "w.csv")
    centerline = load_centerline(tmp_path / "c.csv")

    np.testing.assert_array_equal(raceline.data, oval.raceline.data)
    np.testing.assert_array_equal(centerline.centers, oval.centerline.centers)


def test_closest_waypoint_coincident_and_tie():
    raceline = make_square()

    assert closest_waypoint(raceline, [2.0, 2.0]) == (2, 0.0)
    assert closest_waypoint(raceline, [1.0, 0.0])[0] == 0


def test_closest_waypoint_matches_linear_scan(rng, oval):
    for point in rng.uniform(-8, 8, (50, 2)):
        expected = min(range(len(oval.raceline)), key=lambda i: np.hypot(*(oval.raceline.xy[i] - point)))

        assert closest_waypoint(oval.raceline, point)[0] == expected


def test_resample_straight_line():
    raceline = make_straight_raceline(length=9.0, spacing=1.0)

    points = resample_by_arclength(raceline, 0, 9.0, 10)

    np.testing.assert_allclose(points[:, 0], np.arange(10.0), atol=1e-12)
    np.testing.assert_allclose(points[:, 1], 0.0, atol=1e-12)


def test_resample_full_wrap_returns_to_start():
    points = resample_by_arclength(make_square(), 0, 8.0, 5)

    np.testing.assert_allclose(points[-1], [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(points[1], [2.0, 0.0], atol=1e-12)


def test_resample_matches_arclength_oracle(rng):
    xy = np.cumsum(rng.uniform(0.2, 1.0, (12, 2)), axis=0)
    raceline = Raceline(np.column_stack((xy, np.ones(12), np.zeros(12), np.zeros(12))), closed=False)
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    cumulative = np.concatenate(([0.0], np.cumsum(seg)))

    points = resample_by_arclength(raceline, 0, cumulative[-1] * 0.8, 7)

    for target, point in zip(np.linspace(0.0, cumulative[-1] * 0.8, 7), points):
        i = min(int(np.searchsorted(cumulative, target, side="right")) - 1, len(seg) - 1)
        t = (target - cumulative[i]) / seg[i]
        np.testing.assert_allclose(point, xy[i] + t * (xy[i + 1] - xy[i]), atol=1e-9)


def test_resample_open_track_clamps_at_end():
    raceline = make_straight_raceline(length=2.0, spacing=1.0)

    points = resample_by_arclength(raceline, 1, 5.0, 3)

    np.testing.assert_allclose(points[-1], [2.0, 0.0])


def test_project_onto_raceline_and_cross_track_error():
    raceline = make_square()

    s, d = project_onto_raceline(raceline, [1.5, -0.25])

    assert s == pytest.approx(1.5)
    assert d == pytest.approx(0.25)
    assert cross_track_error(raceline, [2.3, 1.0]) == pytest.approx(0.3)


def test_curvature_circle_and_orientation():
    ccw = curvature_profile(make_circle(2.0, 40), closed=True)
    cw = curvature_profile(make_circle(2.0, 40, clockwise=True), closed=True)

    np.testing.assert_allclose(ccw, 0.5, rtol=1e-9)
    np.testing.assert_allclose(cw, -0.5, rtol=1e-9)


def test_curvature_collinear_is_zero():
    points = np.column_stack((np.arange(6.0), 2.0 * np.arange(6.0)))

    np.testing.assert_array_equal(curvature_profile(points, closed=False), np.zeros(6))


def test_heading_profile_on_circle():
    headings = heading_profile(make_circle(1.0, 8), closed=True)

    assert headings[0] == pytest.approx(math.pi / 2)


def test_speed_profile_caps():
    speeds = speed_profile(np.array([0.0, 0.1, 3.0, -3.0]), v_max=2.0, a_lat_max=3.0)

    np.testing.assert_allclose(speeds, [2.0, 2.0, 1.0, 1.0])


def test_objective_gradient_matches_finite_differences(rng):
    track = TrackCenterline(make_circle(3.0, 24) + rng.normal(0, 0.05, (24, 2)), np.ones(24), np.ones(24))
    normals = track_normals(track)
    alpha = rng.uniform(-0.3, 0.3, 24)
    h = 1e-6

    _, grad = curvature_objective_gradient(alpha, track, normals)

    for i in range(0, 24, 5):
        e = np.zeros(24)
        e[i] = h
        numeric = (curvature_objective(alpha + e, track, normals) - curvature_objective(alpha - e, track, normals)) / (
            2 * h
        )
        assert grad[i] == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_optimizer_straight_corridor():
    centers = np.column_stack((np.arange(11.0), np.zeros(11)))
    track = TrackCenterline(centers, np.ones(11), np.ones(11), closed=False)

    result = optimize_min_curvature(track)

    assert result.objective < 1e-8
    np.testing.assert_allclose(result.alpha.alpha, 0.0, atol=1e-6)


def test_optimizer_annulus_beats_centerline():
    track = TrackCenterline(make_circle(5.0, 60), np.ones(60), np.ones(60))

    result = optimize_min_curvature(track)

    assert result.objective < result.initial_objective
    assert result.initial_objective == pytest.approx(curvature_objective(np.zeros(60), track, track_normals(track)))
    assert np.all(np.abs(result.alpha.alpha) <= 1.0 + 1e-12)
    assert np.mean(np.linalg.norm(result.raceline.xy, axis=1)) > 5.0


def test_optimizer_ring_matches_grid_oracle():
    n = 8
    centers = make_circle(2.0, n)
    track = TrackCenterline(centers, np.full(n, 0.4), np.full(n, 0.4))
    normals = track_normals(track)
    levels = np.array([-0.4, -0.2, 0.0, 0.2, 0.4])
    rest = np.array(np.meshgrid(*([levels] * (n - 1)), indexing="ij")).reshape(n - 1, -1).T
    best = math.inf
    for first in levels:
        grid = np.column_stack((np.full(rest.shape[0], first), rest))
        paths = centers[None] + grid[..., None] * normals[None]
        p0, p1, p2 = np.roll(paths, 1, axis=1), paths, np.roll(paths, -1, axis=1)
        d1, d2, d3 = p1 - p0, p2 - p1, p2 - p0
        cross = d1[..., 0] * d3[..., 1] - d1[..., 1] * d3[..., 0]
        denom = np.linalg.norm(d1, axis=-1) * np.linalg.norm(d2, axis=-1) * np.linalg.norm(d3, axis=-1)
        best = min(best, float(np.min(np.sum((2 * cross / denom) ** 2, axis=1))))

    result = optimize_min_curvature(track)

    assert result.objective <= best + 1e-6


def test_optimizer_iteration_cap_raises_with_history():
    track = TrackCenterline(make_circle(5.0, 60), np.ones(60), np.ones(60))

    with pytest.raises(OptimizerConvergenceError) as exc:
        optimize_min_curvature(track, OptimizerConfig(max_iterations=1))

    assert len(exc.value.history) >= 1


def test_build_oval_is_drivable(oval):
    assert oval.raceline.closed
    assert oval.raceline.perimeter == pytest.approx(16.0 + 6.0 * math.pi, rel=1e-3)
    for index in range(0, len(oval.raceline), 25):
        x, y, _, theta, _ = oval.raceline.data[index]
        assert not check_collision(oval.grid, VehicleState(x=x, y=y, theta=theta), VehicleParams())


def test_build_track_is_deterministic():
    first = build_track("squiggle")
    second = build_track("squiggle")

    np.testing.assert_array_equal(first.raceline.data, second.raceline.data)
    np.testing.assert_array_equal(first.grid.cells, second.grid.cells)


def test_unknown_track_name():
    with pytest.raises(ConfigurationError) as exc:
        build_track("figure-eight")

    assert exc.value.fields == ["track.name"]


def test_write_track_files_load_back(tmp_path, oval):
    files = write_track(oval, tmp_path)

    grid = load_map(files.map_path)
    raceline = load_waypoints(files.waypoints_path)

    np.testing.assert_array_equal(grid.cells, oval.grid.cells)
    assert grid.resolution == pytest.approx(oval.grid.resolution)
    assert len(raceline) == len(oval.raceline)
