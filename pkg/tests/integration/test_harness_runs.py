from pathlib import Path

import numpy as np
import pytest
import yaml
from typer.testing import CliRunner

from src.cli.main import app
from src.harness import (
    ExperimentConfig,
    RunArtifacts,
    load_experiment_config,
    read_returns,
    read_rows,
    read_summary,
    run,
)
from src.harness.compare import moving_average
from src.harness.config import validate_experiment
from src.learn import load_checkpoint
from src.sim.episode import metrics_path_for, read_trajectory_log

RECIPES = Path(__file__).resolve().parents[2] / "config" / "experiments"

runner = CliRunner()


def tiny_recipe(output_dir: Path, **overrides) -> dict:
    recipe = {
        "name": "tiny-bc",
        "mode": "bc-train",
        "seed": 4,
        "output_dir": str(output_dir),
        "track": {"name": "oval"},
        "sim": {"beam_count": 12, "max_steps": 25},
        "train": {
            "total_timesteps": 64,
            "n_envs": 2,
            "n_steps": 16,
            "update_epochs": 1,
            "num_minibatches": 2,
            "hidden_sizes": [16],
            "checkpoint_interval": 32,
        },
        "eval": {"episodes": 2},
    }
    recipe.update(overrides)
    return recipe


def test_bc_run_writes_artifacts(tmp_path):
    out = tmp_path / "bc"

    artifacts = run(validate_experiment(tiny_recipe(out)))

    assert artifacts.output_dir == out
    assert (out / "config.yaml").is_file()
    assert load_experiment_config(out / "config.yaml").seed == 4
    assert [p.name for p in artifacts.checkpoints] == [
        "step_000000032.ckpt",
        "step_000000064.ckpt",
        "final.ckpt",
    ]
    policy = load_checkpoint(out / "checkpoints" / "final.ckpt")
    assert policy.observation_dim == 12 + 2 * 10 + 1
    assert read_returns(out / "returns.csv")
    assert [row["step"] for row in read_rows(out / "losses.csv")] == [32.0, 64.0]
    assert len(artifacts.episodes) == 2
    assert read_trajectory_log(artifacts.episodes[0])
    assert metrics_path_for(artifacts.episodes[0]).is_file()
    summary = read_summary(out / "summary.csv")
    assert summary["episodes"] == 2.0


def test_same_seed_gives_identical_artifacts(tmp_path):
    first = run(validate_experiment(tiny_recipe(tmp_path / "a")))
    second = run(validate_experiment(tiny_recipe(tmp_path / "b")))

    assert first.returns_path is not None and second.returns_path is not None
    assert first.returns_path.read_bytes() == second.returns_path.read_bytes()
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_ppo_and_eval_from_bc_checkpoint(tmp_path):
    run(validate_experiment(tiny_recipe(tmp_path / "bc")))
    checkpoint = tmp_path / "bc" / "checkpoints" / "final.ckpt"

    ppo = run(
        validate_experiment(
            tiny_recipe(
                tmp_path / "ppo",
                name="tiny-ppo",
                mode="ppo-train",
                obstacles=[{"waypoint_index": 60, "lateral_shift": 0.2}],
                train={**tiny_recipe(tmp_path)["train"], "bootstrap_checkpoint": str(checkpoint)},
            )
        )
    )
    assert "critic_loss" in read_rows(ppo.losses_path)[0]

    evaluation = run(
        validate_experiment(
            tiny_recipe(tmp_path / "eval", name="tiny-eval", mode="eval", eval={"episodes": 3, "checkpoint": str(checkpoint)})
        )
    )
    assert evaluation.returns_path is None
    assert read_summary(evaluation.summary_path)["episodes"] == 3.0


def test_cli_make_track_and_compare(tmp_path):
    result = runner.invoke(app, ["make-track", "squiggle", "-o", str(tmp_path / "tracks")])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "tracks" / "squiggle_waypoints.csv").is_file()

    bc = run(validate_experiment(tiny_recipe(tmp_path / "bc")))
    result = runner.invoke(app, ["compare", str(bc.output_dir), "-o", str(tmp_path / "cmp"), "--window", "2"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "cmp" / "merged_returns.csv").is_file()


def test_tiny_run_on_the_squiggle_track(tmp_path):
    artifacts = run(validate_experiment(tiny_recipe(tmp_path / "squiggle", track={"name": "squiggle"})))

    assert (tmp_path / "squiggle" / "checkpoints" / "final.ckpt").is_file()
    assert read_summary(artifacts.summary_path)["episodes"] == 2.0


def test_generated_track_files_work_as_a_custom_map(tmp_path):
    result = runner.invoke(app, ["make-track", "oval", "-o", str(tmp_path / "tracks")])
    assert result.exit_code == 0, result.output
    track = {
        "map": str(tmp_path / "tracks" / "oval.pgm"),
        "waypoints": str(tmp_path / "tracks" / "oval_waypoints.csv"),
        "centerline": str(tmp_path / "tracks" / "oval_centerline.csv"),
    }

    artifacts = run(validate_experiment(tiny_recipe(tmp_path / "custom", name="custom-eval", mode="eval", track=track)))

    summary = read_summary(artifacts.summary_path)
    assert summary["episodes"] == 2.0
    assert summary["collision_rate"] == 0.0


def test_cli_reports_configuration_errors(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("name: x\nmode: bc-train\nplanning:\n  horizon: 1\n")

    result = runner.invoke(app, ["run", str(broken)])

    assert result.exit_code == 1
    assert "planning.horizon" in result.output


@pytest.mark.slow
def test_raceline_recipe(tmp_path):
    config = load_experiment_config(RECIPES / "raceline-oval.yaml")
    config = config.model_copy(update={"output_dir": tmp_path})

    artifacts = run(config)

    summary = read_summary(artifacts.summary_path)
    assert summary["objective"] < summary["initial_objective"]
    assert (tmp_path / "raceline_waypoints.csv").is_file()


def shipped_recipe(recipe: str, output_dir: Path, **overrides) -> ExperimentConfig:
    raw = yaml.safe_load((RECIPES / f"{recipe}.yaml").read_text())
    raw["output_dir"] = str(output_dir)
    for section, values in overrides.items():
        raw[section] = {**raw[section], **values} if isinstance(values, dict) else values
    return validate_experiment(raw)


def smoothed_returns(artifacts: RunArtifacts, window: int = 10) -> list[float]:
    assert artifacts.returns_path is not None
    return moving_average([r for _, r in read_returns(artifacts.returns_path)], window)


@pytest.fixture(scope="module")
def bc_checkpoint(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("bc-pp")
    run(shipped_recipe("bc-pp", out), workers=2)
    return out / "checkpoints" / "final.ckpt"


@pytest.fixture(scope="module")
def ppo_runs(tmp_path_factory, bc_checkpoint) -> dict[str, list[RunArtifacts]]:
    root = tmp_path_factory.mktemp("ppo")
    runs: dict[str, list[RunArtifacts]] = {"bootstrap": [], "scratch": []}
    for seed in range(5):
        bootstrap = shipped_recipe(
            "ppo-1obs", root / f"bootstrap-{seed}", seed=seed, train={"bootstrap_checkpoint": str(bc_checkpoint)}
        )
        runs["bootstrap"].append(run(bootstrap, workers=4))
        runs["scratch"].append(run(shipped_recipe("ppo-1obs-scratch", root / f"scratch-{seed}", seed=seed), workers=4))
    return runs


@pytest.mark.slow
@pytest.mark.parametrize("recipe", ["bc-pp", "bc-mpc"])
def test_bc_recipe_learns_to_lap(tmp_path, recipe):
    artifacts = run(shipped_recipe(recipe, tmp_path), workers=2)

    summary = read_summary(artifacts.summary_path)
    assert summary["collision_rate"] == 0.0
    assert summary["completion_rate"] == 1.0
    assert summary["mean_abs_offset"] < 0.05


@pytest.mark.slow
def test_bootstrapped_ppo_passes_one_obstacle(ppo_runs):
    summaries = [read_summary(a.summary_path) for a in ppo_runs["bootstrap"]]

    assert sum(s["collision_rate"] == 0.0 for s in summaries) >= 4
    for artifacts in ppo_runs["bootstrap"]:
        curve = smoothed_returns(artifacts)
        assert curve[-1] > curve[0]


@pytest.mark.slow
def test_bootstrap_beats_random_init_at_200k_steps(ppo_runs):
    def final_mean(kind: str) -> float:
        return float(np.mean([smoothed_returns(a)[-1] for a in ppo_runs[kind]]))

    assert final_mean("bootstrap") >= final_mean("scratch")


@pytest.mark.slow
def test_bootstrapped_ppo_keeps_lapping_without_obstacles(tmp_path, bc_checkpoint):
    config = shipped_recipe(
        "ppo-1obs",
        tmp_path,
        obstacles=[],
        train={"bootstrap_checkpoint": str(bc_checkpoint), "total_timesteps": 100_000},
    )

    summary = read_summary(run(config, workers=4).summary_path)

    assert summary["completion_rate"] == 1.0
    assert summary["collision_rate"] == 0.0
