import math

import numpy as np
import pytest

from src.errors import ConfigurationError, ObstaclePlacementError, TrackFormatError
from src.geometry import Pose2D
from src.sim.dynamics import step_dynamics
from src.sim.grid import ObstacleSpec, OccupancyGrid, check_collision, load_map, place_obstacles, raycast, save_map
from src.sim.reward import RewardConfig, compute_reward
from src.sim.state import Action, VehicleParams, VehicleState, load_vehicle_params


def make_room() -> OccupancyGrid:
    """10 m x 10 m room centred on the origin with one-cell walls."""
    cells = np.zeros((200, 200), dtype=bool)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = True
    return OccupancyGrid(cells=cells, resolution=0.05, origin=Pose2D(-5.0, -5.0, 0.0))


def midpoint_oracle(state: VehicleState, accel: float, steer_rate: float, wheelbase: float, dt: float, steps: int):
    x = np.array([state.x, state.y, state.theta, state.v, state.delta])

    def f(s):
        return np.array(
            [s[3] * math.cos(s[2]), s[3] * math.sin(s[2]), s[3] * math.tan(s[4]) / wheelbase, accel, steer_rate]
        )

    for _ in range(steps):
        x = x + dt * f(x + 0.5 * dt * f(x))
    return x


def test_straight_motion(params):
    state = VehicleState(v=1.0)

    nxt = step_dynamics(state, Action(delta_des=0.0, v_des=1.0), params, 0.01)

    assert nxt.x == pytest.approx(0.01, abs=1e-12)
    assert nxt.y == 0.0
    assert nxt.theta == 0.0


def test_constant_steering_traces_circle(params):
    delta = 0.3
    radius = params.wheelbase / math.tan(delta)
    state = VehicleState(v=1.0, delta=delta)
    steps = int(round(2 * math.pi * radius / 0.01))

    for _ in range(steps):
        state = step_dynamics(state, Action(delta_des=delta, v_des=1.0), params, 0.01)
        assert math.hypot(state.x, state.y - radius) == pytest.approx(radius, rel=1e-3)


def test_rk4_matches_fine_step_oracle(params):
    state = VehicleState(x=0.5, y=-0.2, v=1.2, theta=0.4, delta=0.25)
    action = Action(delta_des=0.25, v_des=1.2)

    current = state
    for _ in range(100):
        current = step_dynamics(current, action, params, 0.01)
    expected = midpoint_oracle(state, 0.0, 0.0, params.wheelbase, 1e-4, 10_000)

    np.testing.assert_allclose([current.x, current.y, current.theta, current.v], expected[:4], atol=1e-6)


def test_actuator_limits(params):
    state = VehicleState(v=0.0)

    nxt = step_dynamics(state, Action(delta_des=2.0, v_des=10.0), params, 0.01)

    assert nxt.v == pytest.approx(params.a_max * 0.01)
    assert nxt.delta == pytest.approx(params.steer_rate_max * 0.01)


def test_speed_and_steering_stay_in_bounds(params, rng):
    state = VehicleState()
    for _ in range(300):
        action = Action(delta_des=rng.uniform(-1, 1), v_des=rng.uniform(-1, 3))
        state = step_dynamics(state, action, params, 0.01)
        assert 0.0 <= state.v <= params.v_max
        assert abs(state.delta) <= params.delta_max
        assert -math.pi < state.theta <= math.pi


def test_load_vehicle_params(tmp_path):
    path = tmp_path / "car.yaml"
    path.write_text("wheelbase: 0.4\nv_max: 3.0\n")

    params = load_vehicle_params(path)

    assert params.wheelbase == 0.4
    assert params.v_max == 3.0
    assert params.delta_max == VehicleParams().delta_max


def test_load_vehicle_params_rejects_unknown_keys(tmp_path):
    path = tmp_path / "car.yaml"
    path.write_text("wheelbase: 0.4\nwings: 2\n")

    with pytest.raises(ConfigurationError) as exc:
        load_vehicle_params(path)

    assert exc.value.fields == ["wings"]


def test_raycast_hits_room_walls():
    scan = raycast(make_room(), Pose2D(0.0, 0.0, 0.0), beam_count=3, fov=math.pi, range_max=10.0)

    np.testing.assert_allclose(scan.ranges, 5.0, atol=0.05)


def test_raycast_caps_at_range_max(empty_grid):
    scan = raycast(empty_grid, Pose2D(0.0, 0.0, 0.3), beam_count=108, fov=4.7, range_max=3.0)

    np.testing.assert_array_equal(scan.ranges, np.full(108, 3.0))
    assert scan.angle_increment == pytest.approx(4.7 / 107)
    assert scan.angle_min == pytest.approx(-2.35)


def test_raycast_from_inside_wall_is_all_zero():
    scan = raycast(make_room(), Pose2D(-4.99, 0.0, 0.0), beam_count=5, fov=1.0, range_max=10.0)

    np.testing.assert_array_equal(scan.ranges, np.zeros(5))


def test_collision_free_and_inside_wall(params):
    room = make_room()

    assert not check_collision(room, VehicleState(), params)
    assert check_collision(room, VehicleState(x=4.8, theta=0.0), params)


def test_collision_on_exact_cell_boundary(empty_grid, params):
    cells = np.array(empty_grid.cells)
    cells[195:206, 220] = True
    grid = OccupancyGrid(cells=cells, resolution=empty_grid.resolution, origin=empty_grid.origin)
    front = params.wheelbase / 2.0 + params.body_length / 2.0

    assert check_collision(grid, VehicleState(x=1.0 - front), params)
    assert not check_collision(grid, VehicleState(x=0.95 - front), params)


def test_place_obstacles_counts(empty_grid, straight_raceline):
    assert place_obstacles(empty_grid, straight_raceline, []) is empty_grid

    one = place_obstacles(empty_grid, straight_raceline, [ObstacleSpec(20, 0.0, 0.35)])
    two = place_obstacles(empty_grid, straight_raceline, [ObstacleSpec(20), ObstacleSpec(60)])

    assert one.occupied_count() == 49
    assert two.occupied_count() == 98
    assert empty_grid.occupied_count() == 0


def test_place_obstacles_out_of_bounds(empty_grid, straight_raceline):
    with pytest.raises(ObstaclePlacementError) as exc:
        place_obstacles(empty_grid, straight_raceline, [ObstacleSpec(10), ObstacleSpec(20, lateral_shift=50.0)])

    assert exc.value.index == 1


def test_map_files_round_trip(tmp_path):
    room = make_room()

    save_map(room, tmp_path / "room.pgm")
    loaded = load_map(tmp_path / "room.pgm")

    np.testing.assert_array_equal(loaded.cells, room.cells)
    assert loaded.origin == room.origin


def test_load_map_missing_sidecar(tmp_path):
    (tmp_path / "room.pgm").write_text("P2\n1 1\n255\n0\n")

    with pytest.raises(TrackFormatError, match="room.yaml"):
        load_map(tmp_path / "room.pgm")


def test_reward_values():
    assert compute_reward(10, np.zeros(10), False) == 1000.0
    assert compute_reward(10, [0.3, 0.4] + [0.0] * 8, False) == pytest.approx(999.5)
    assert compute_reward(10, np.zeros(10), True) == 0.0


def test_reward_config_scales():
    config = RewardConfig(step_bonus=1.0, collision_penalty=5.0)

    assert compute_reward(3, [0.0], True, config) == pytest.approx(-2.0)
