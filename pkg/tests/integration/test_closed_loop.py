import math

import numpy as np
import pytest

from src.controllers import MpcConfig, MpcController, PurePursuitConfig, PurePursuitController
from src.errors import ConfigurationError
from src.geometry import Pose2D
from src.learn import init_policy
from src.planner.horizon import PlanningConfig
from src.sim.episode import (
    Environment,
    SimConfig,
    VecEnvironment,
    read_trajectory_log,
    run_episode,
    write_trajectory_log,
)
from src.sim.grid import OccupancyGrid
from src.sim.state import VehicleState
from src.track.waypoints import cross_track_error
from tests.conftest import make_straight_raceline

FAST_SCAN = {"beam_count": 24, "fov": 4.7, "range_max": 10.0}


def make_env(oval, params, controller=None, seed=0, **sim) -> Environment:
    options = {"randomize_start": False, "max_steps": 400, **FAST_SCAN, **sim}
    return Environment(
        grid=oval.grid,
        raceline=oval.raceline,
        params=params,
        controller=controller or PurePursuitController(PurePursuitConfig(), params),
        planning=PlanningConfig(),
        sim=SimConfig(**options),
        seed=seed,
    )


def test_pure_pursuit_completes_a_lap(oval, params):
    env = make_env(oval, params)

    log = run_episode(env)

    assert log.lap_completed
    assert not log.collided
    assert log.max_cross_track_error(after=2.0) < 0.15
    assert log.max_abs_offset == 0.0
    assert log.episodic_return > 0.0


def test_mpc_completes_a_lap(oval, params):
    controller = MpcController(MpcConfig.from_params(params, horizon=10), params)
    env = make_env(oval, params, controller=controller)

    log = run_episode(env)

    assert log.lap_completed
    assert not log.collided
    assert log.max_cross_track_error(after=2.0) < 0.15


def test_large_offsets_drive_into_the_wall(oval, params):
    env = make_env(oval, params, start_speed=1.0)
    env.reset()

    for _ in range(100):
        outcome = env.step(np.full(env.action_dim, 3.0))
        if outcome.done:
            break

    assert outcome.collided
    assert not outcome.lap_completed
    # At most nine sub-steps survive on the colliding step.
    assert outcome.sub_steps < 10
    offset_norm = 3.0 * math.sqrt(env.action_dim)
    assert outcome.reward == pytest.approx(100.0 * outcome.sub_steps - offset_norm - 1000.0)


def test_zero_max_steps_gives_empty_log(oval, params):
    log = run_episode(make_env(oval, params), max_steps=0)

    assert log.steps == 0
    assert log.episodic_return == 0.0
    assert not log.collided and not log.lap_completed


def test_truncation_at_step_limit(oval, params):
    env = make_env(oval, params, max_steps=5)
    env.reset()

    outcomes = [env.step(np.zeros(env.action_dim)) for _ in range(5)]

    assert [o.truncated for o in outcomes] == [False] * 4 + [True]
    assert outcomes[-1].done and not outcomes[-1].collided
    assert all(o.sub_steps == 10 for o in outcomes)


def test_episodes_are_deterministic_for_a_seed(oval, params):
    policy = init_policy(make_env(oval, params).observation_dim, 10, np.random.default_rng(5), hidden_sizes=(16,))

    logs = [
        run_episode(make_env(oval, params, randomize_start=True), policy, max_steps=30, seed=42) for _ in range(2)
    ]

    assert logs[0].records == logs[1].records
    assert logs[0].episodic_return == logs[1].episodic_return


def test_stochastic_rollouts_repeat_with_the_same_generator(oval, params):
    policy = init_policy(make_env(oval, params).observation_dim, 10, np.random.default_rng(5), hidden_sizes=(16,))

    first, second = (
        run_episode(
            make_env(oval, params), policy, max_steps=20, deterministic=False, rng=np.random.default_rng(8)
        )
        for _ in range(2)
    )

    assert first.records == second.records
    assert first.max_abs_offset > 0.0


def test_trajectory_log_round_trip(oval, params, tmp_path):
    log = run_episode(make_env(oval, params), max_steps=15)

    path = write_trajectory_log(log, tmp_path / "episodes" / "episode_000.csv")

    lines = path.read_text().splitlines()
    assert lines[0] == "t;x;y;v;theta;delta;reward;collided"
    assert len(lines) == 16
    metrics = (tmp_path / "episodes" / "episode_000_metrics.csv").read_text().splitlines()
    assert metrics[0] == "t;mean_abs_offset;max_abs_offset;cross_track_error"
    assert read_trajectory_log(path) == log.records


def test_trajectory_log_reads_without_metrics(oval, params, tmp_path):
    log = run_episode(make_env(oval, params), max_steps=3)
    path = write_trajectory_log(log, tmp_path / "episode.csv")
    (tmp_path / "episode_metrics.csv").unlink()

    records = read_trajectory_log(path)

    assert [(r.t, r.x, r.collided) for r in records] == [(r.t, r.x, r.collided) for r in log.records]
    assert all(math.isnan(r.cross_track_error) for r in records)


def test_vectorized_stepping_matches_with_threads(oval, params):
    def rollout(workers: int):
        envs = VecEnvironment([make_env(oval, params, seed=s, randomize_start=True) for s in (1, 2, 3)], workers)
        try:
            observations = [envs.reset()]
            rewards = []
            offsets = np.tile(np.linspace(-0.2, 0.2, envs.action_dim), (3, 1))
            for _ in range(8):
                step = envs.step(offsets)
                observations.append(step.observations)
                rewards.append(step.rewards)
            return np.array(observations), np.array(rewards)
        finally:
            envs.close()

    serial = rollout(1)
    threaded = rollout(2)

    np.testing.assert_array_equal(serial[0], threaded[0])
    np.testing.assert_array_equal(serial[1], threaded[1])


def test_vectorized_auto_reset_reports_finished_episodes(oval, params):
    envs = VecEnvironment([make_env(oval, params, max_steps=3), make_env(oval, params, max_steps=5)])
    envs.reset()

    finished = []
    for _ in range(6):
        step = envs.step(np.zeros((2, envs.action_dim)))
        finished.extend((e.env_index, e.length) for e in step.finished)

    assert finished == [(0, 3), (1, 5), (0, 3)]


def test_blocked_start_pose_is_a_configuration_error(params, oval):
    solid = OccupancyGrid(cells=np.ones((100, 100), dtype=bool), resolution=0.05, origin=Pose2D(-2.5, -2.5, 0.0))
    env = Environment(
        grid=solid,
        raceline=oval.raceline,
        params=params,
        controller=PurePursuitController(PurePursuitConfig(), params),
        sim=SimConfig(start_attempts=5, **FAST_SCAN),
        seed=0,
    )

    with pytest.raises(ConfigurationError, match="5 attempts"):
        env.reset()


def test_mpc_recovers_from_lateral_displacement(oval, params):
    controller = MpcController(MpcConfig.from_params(params, horizon=10), params)
    env = make_env(oval, params, controller=controller, start_speed=1.0)
    env.reset()
    heading = env.state.theta
    env.state = VehicleState(
        x=env.state.x - 0.5 * math.sin(heading),
        y=env.state.y + 0.5 * math.cos(heading),
        v=env.state.v,
        theta=heading,
    )
    assert cross_track_error(oval.raceline, env.state.position) == pytest.approx(0.5, abs=0.05)

    for _ in range(30):
        outcome = env.step(np.zeros(env.action_dim))
        assert not outcome.collided

    assert outcome.cross_track_error < 0.05
    assert controller.last_solution is not None


def make_open_env(empty_grid, params, **sim) -> Environment:
    options = {"randomize_start": False, "start_speed": 0.5, "max_steps": 20, **FAST_SCAN, **sim}
    return Environment(
        grid=empty_grid,
        raceline=make_straight_raceline(length=6.0),
        params=params,
        controller=MpcController(MpcConfig.from_params(params, horizon=6), params),
        sim=SimConfig(**options),
        seed=0,
    )


def test_mpc_drives_off_the_end_of_an_open_raceline(empty_grid, params):
    env = make_open_env(empty_grid, params)
    env.reset()
    env.state = VehicleState(x=5.97, y=0.0, v=0.5, theta=0.0)

    outcome = env.step(np.zeros(env.action_dim))

    assert outcome.lap_completed
    assert not outcome.collided
    assert outcome.state.x > 5.97


def test_start_on_last_waypoint_completes_without_control(empty_grid, params):
    env = make_open_env(empty_grid, params, start_index=-1)
    env.reset()
    assert env.at_open_end()

    outcome = env.step(np.zeros(env.action_dim))

    assert outcome.lap_completed and outcome.done
    assert outcome.sub_steps == 0
    assert outcome.reward == 0.0
    assert env.controller.last_solution is None

    log = run_episode(env)
    assert log.steps == 1 and log.lap_completed
