"""Mode dispatch for experiment recipes and the artifacts each mode leaves behind."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from src.controllers import ControllerKind, build_controller
from src.errors import CheckpointError
from src.harness import artifacts
from src.harness.artifacts import RunArtifacts
from src.harness.config import ExperimentConfig, Mode, dump_experiment_config
from src.learn.bc import bc_train
from src.learn.checkpoint import load_checkpoint, save_checkpoint
from src.learn.policy import PolicyParams
from src.learn.ppo import ppo_train
from src.learn.trainer import EvaluationSummary, TrainingResult, evaluate_policy
from src.sim.episode import Environment, VecEnvironment, write_trajectory_log
from src.sim.grid import OccupancyGrid, load_map, place_obstacles
from src.sim.state import VehicleParams
from src.track.generator import build_track
from src.track.optimizer import OptimizationResult, OptimizerConfig, optimize_min_curvature
from src.track.waypoints import Raceline, TrackCenterline, load_centerline, load_waypoints, save_waypoints

logger = structlog.get_logger(__name__)

FINAL_CHECKPOINT = "final.ckpt"


@dataclass(frozen=True)
class RunTrack:
    grid: OccupancyGrid
    raceline: Raceline
    centerline: TrackCenterline | None = None


def load_run_track(config: ExperimentConfig) -> RunTrack:
    """Map, raceline and (when known) centerline, with the recipe's obstacles stamped into the map."""
    section = config.track
    if section.builtin:
        assets = build_track(str(section.name), section.shape())
        track = RunTrack(assets.grid, assets.raceline, assets.centerline)
    else:
        assert section.map is not None and section.waypoints is not None
        centerline = load_centerline(section.centerline, section.closed) if section.centerline else None
        track = RunTrack(load_map(section.map), load_waypoints(section.waypoints, section.closed), centerline)
    if config.obstacles:
        grid = place_obstacles(track.grid, track.raceline, [o.build() for o in config.obstacles])
        track = RunTrack(grid, track.raceline, track.centerline)
    return track


def build_environment(
    config: ExperimentConfig, track: RunTrack, params: VehicleParams, seed: int | None
) -> Environment:
    controller = build_controller(
        config.controller.kind,
        params,
        pure_pursuit=config.controller.pure_pursuit(),
        mpc=config.controller.mpc(params) if config.controller.kind is ControllerKind.MPC else None,
    )
    return Environment(
        grid=track.grid,
        raceline=track.raceline,
        params=params,
        controller=controller,
        planning=config.planning.build(),
        sim=config.sim.build(),
        reward=config.reward.build(),
        seed=seed,
    )


def environment_seeds(seed: int, count: int) -> list[int]:
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def build_vec_environment(
    config: ExperimentConfig, track: RunTrack, params: VehicleParams, workers: int = 1
) -> VecEnvironment:
    seeds = environment_seeds(config.seed, config.train.n_envs)
    return VecEnvironment([build_environment(config, track, params, seed) for seed in seeds], workers=workers)


def _write_evaluation(summary: EvaluationSummary, out: Path, run: RunArtifacts) -> None:
    for i, log in enumerate(summary.logs):
        run.episodes.append(write_trajectory_log(log, out / artifacts.EPISODE_DIR / f"episode_{i:03d}.csv"))
    run.summary_path = artifacts.write_summary(out / artifacts.SUMMARY_FILE, summary.as_row())


def _load_policy(path: Path, env: Environment) -> PolicyParams:
    return load_checkpoint(path, expected_input_dim=env.observation_dim, expected_action_dim=env.action_dim)


def _train(config: ExperimentConfig, run: RunArtifacts, workers: int) -> TrainingResult:
    out = run.output_dir
    params = config.vehicle_params()
    track = load_run_track(config)
    cfg = config.train.build(config.seed)
    envs = build_vec_environment(config, track, params, workers=workers)

    def on_checkpoint(policy: PolicyParams, step: int) -> None:
        path = save_checkpoint(policy, out / artifacts.CHECKPOINT_DIR / f"step_{step:09d}.ckpt")
        run.checkpoints.append(path)
        logger.info("checkpoint_written", path=str(path), step=step)

    try:
        if config.mode is Mode.BC_TRAIN:
            result = bc_train(envs, cfg, on_checkpoint=on_checkpoint, checkpoint_interval=config.train.checkpoint_interval)
        else:
            bootstrap = None
            if config.train.bootstrap:
                if config.train.bootstrap_checkpoint is None:
                    raise CheckpointError("ppo-train with bootstrap needs a checkpoint")
                bootstrap = _load_policy(config.train.bootstrap_checkpoint, envs.envs[0])
            result = ppo_train(
                envs, cfg, bootstrap, on_checkpoint=on_checkpoint, checkpoint_interval=config.train.checkpoint_interval
            )
    finally:
        envs.close()

    run.checkpoints.append(save_checkpoint(result.policy, out / artifacts.CHECKPOINT_DIR / FINAL_CHECKPOINT))
    run.returns_path = artifacts.write_returns(out / artifacts.RETURNS_FILE, result.returns)
    run.losses_path = artifacts.write_rows(out / artifacts.LOSSES_FILE, result.losses)

    env = build_environment(config, track, params, seed=config.seed)
    summary = evaluate_policy(env, result.policy, config.eval.episodes, seed=config.seed, max_steps=config.eval.max_steps)
    _write_evaluation(summary, out, run)
    return result


def _evaluate(config: ExperimentConfig, run: RunArtifacts) -> EvaluationSummary:
    params = config.vehicle_params()
    env = build_environment(config, load_run_track(config), params, seed=config.seed)
    policy = _load_policy(config.eval.checkpoint, env) if config.eval.checkpoint else None
    summary = evaluate_policy(env, policy, config.eval.episodes, seed=config.seed, max_steps=config.eval.max_steps)
    _write_evaluation(summary, run.output_dir, run)
    return summary


def optimize_raceline_file(
    centerline: TrackCenterline, output: Path, optimizer: OptimizerConfig | None = None
) -> OptimizationResult:
    result = optimize_min_curvature(centerline, optimizer)
    save_waypoints(result.raceline, output)
    logger.info("raceline_written", path=str(output), objective=result.objective, iterations=result.iterations)
    return result


def _raceline(config: ExperimentConfig, run: RunArtifacts) -> OptimizationResult:
    section = config.track
    if section.centerline is not None:
        centerline = load_centerline(section.centerline, section.closed)
    else:
        centerline = build_track(str(section.name), section.shape()).centerline
    output = config.raceline.output or run.output_dir / "raceline_waypoints.csv"
    optimizer = OptimizerConfig(
        max_iterations=config.raceline.max_iterations, v_max=section.v_max, a_lat_max=section.a_lat_max
    )
    result = optimize_raceline_file(centerline, output, optimizer)
    run.extra.append(output)
    run.extra.append(
        artifacts.write_table(
            run.output_dir / "objective_history.csv", ["iteration", "objective"], enumerate(result.history)
        )
    )
    run.summary_path = artifacts.write_summary(
        run.output_dir / artifacts.SUMMARY_FILE,
        {
            "initial_objective": result.initial_objective,
            "objective": result.objective,
            "iterations": float(result.iterations),
        },
    )
    return result


def run(config: ExperimentConfig, workers: int = 1) -> RunArtifacts:
    """Execute one recipe end to end; every mode writes the resolved config first."""
    out = config.resolved_output_dir
    out.mkdir(parents=True, exist_ok=True)
    structlog.contextvars.bind_contextvars(run=config.name, seed=config.seed)
    try:
        logger.info("run_started", mode=config.mode.value, output_dir=str(out))
        run_artifacts = RunArtifacts(
            output_dir=out, config_path=dump_experiment_config(config, out / artifacts.CONFIG_FILE)
        )
        if config.mode in (Mode.BC_TRAIN, Mode.PPO_TRAIN):
            _train(config, run_artifacts, workers)
        elif config.mode is Mode.EVAL:
            _evaluate(config, run_artifacts)
        else:
            _raceline(config, run_artifacts)
        logger.info("run_finished", mode=config.mode.value, output_dir=str(out))
        return run_artifacts
    finally:
        structlog.contextvars.unbind_contextvars("run", "seed")
