from pathlib import Path
from typing import NoReturn, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from src.config import settings
from src.errors import PlannerError
from src.harness import compare_runs, load_experiment_config, read_summary, run
from src.harness.config import Mode, validate_experiment
from src.harness.runner import optimize_raceline_file
from src.logging_config import configure_logging
from src.track.generator import BUILTIN_TRACKS, TrackShape, build_track, write_track
from src.track.optimizer import OptimizerConfig
from src.track.waypoints import load_centerline

app = typer.Typer(name="racer", help="Learned trajectory offsets on top of classical path tracking")
console = Console()


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Override LOG_LEVEL"),
    log_format: Optional[str] = typer.Option(None, "--log-format", help="console or json"),
):
    configure_logging(log_level, log_format)


def _fail(error: PlannerError) -> NoReturn:
    console.print(f"[red]Error:[/red] {escape(str(error))}")
    raise typer.Exit(code=1)


def _print_summary(title: str, summary: dict[str, float]) -> None:
    table = Table(title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for metric, value in summary.items():
        table.add_row(metric, f"{value:.6g}")
    console.print(table)


@app.command(name="run")
def run_command(
    config: Path = typer.Argument(..., help="Experiment recipe (YAML)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the recipe's seed"),
    workers: int = typer.Option(settings.rollout_workers, "--workers", help="Threads stepping environments"),
):
    """Run an experiment recipe: bc-train, ppo-train, eval or raceline."""
    try:
        experiment = load_experiment_config(config, seed=seed)
        with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console) as p:
            p.add_task(f"Running {experiment.name} ({experiment.mode.value})...", total=None)
            result = run(experiment, workers=workers)
    except PlannerError as e:
        _fail(e)

    console.print(f"\n[green]Artifacts written to {result.output_dir}[/green]")
    if result.summary_path is not None:
        _print_summary(f"{experiment.name} summary", read_summary(result.summary_path))


@app.command(name="eval")
def eval_command(
    config: Path = typer.Argument(..., help="Experiment recipe supplying track, controller and planning settings"),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Policy checkpoint; omit for zero offsets"),
    episodes: Optional[int] = typer.Option(None, "--episodes", help="Number of deterministic episodes"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the recipe's seed"),
):
    """Evaluate a checkpoint with deterministic episodes."""
    try:
        experiment = load_experiment_config(config, seed=seed)
        data = experiment.model_dump(mode="json")
        data["mode"] = Mode.EVAL.value
        if experiment.mode is not Mode.EVAL:
            data["name"] = f"{experiment.name}-eval"
            data["output_dir"] = None
        if checkpoint is not None:
            data["eval"]["checkpoint"] = str(checkpoint)
        if episodes is not None:
            data["eval"]["episodes"] = episodes
        result = run(validate_experiment(data))
    except PlannerError as e:
        _fail(e)

    assert result.summary_path is not None
    _print_summary("Evaluation", read_summary(result.summary_path))


@app.command()
def raceline(
    centerline: Path = typer.Argument(..., help="Centerline CSV (x;y;w_left;w_right)"),
    output: Path = typer.Option(..., "--output", "-o", help="Waypoint CSV to write"),
    closed: bool = typer.Option(True, "--closed/--open", help="Treat the centerline as a loop"),
    v_max: float = typer.Option(2.0, "--v-max", help="Speed cap for the speed profile"),
    a_lat_max: float = typer.Option(3.0, "--a-lat-max", help="Lateral acceleration limit"),
):
    """Optimize a minimum-curvature raceline within the track bounds."""
    try:
        track = load_centerline(centerline, closed=closed)
        result = optimize_raceline_file(track, output, OptimizerConfig(v_max=v_max, a_lat_max=a_lat_max))
    except PlannerError as e:
        _fail(e)

    _print_summary(
        "Raceline",
        {
            "initial_objective": result.initial_objective,
            "objective": result.objective,
            "iterations": float(result.iterations),
        },
    )
    console.print(f"\n[green]Waypoints written to {output}[/green]")


@app.command()
def compare(
    runs: list[Path] = typer.Argument(..., help="Run directories containing returns.csv"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Directory for the merged CSVs"),
    window: int = typer.Option(settings.return_window, "--window", help="Moving-average window in episodes"),
    threshold: Optional[float] = typer.Option(None, "--threshold", help="Return level for steps-to-threshold"),
):
    """Merge return curves from several runs and summarize them."""
    try:
        comparison = compare_runs(runs, output_dir=output, window=window, threshold=threshold)
    except PlannerError as e:
        _fail(e)

    table = Table(title="Run Comparison")
    table.add_column("Run", style="cyan")
    table.add_column("Episodes")
    table.add_column("Final step")
    table.add_column("Final moving avg", style="green")
    table.add_column("Steps to threshold")
    for summary in comparison.summaries:
        table.add_row(
            summary.run,
            str(summary.episodes),
            str(summary.final_step),
            f"{summary.final_moving_average:.3f}",
            "-" if summary.steps_to_threshold is None else str(summary.steps_to_threshold),
        )
    console.print(table)


@app.command(name="make-track")
def make_track(
    name: str = typer.Argument(..., help=f"Builtin track: {', '.join(sorted(BUILTIN_TRACKS))}"),
    output_dir: Path = typer.Option(Path("assets/tracks"), "--output-dir", "-o", help="Where to write the files"),
    half_width: float = typer.Option(1.0, "--half-width", help="Track half width in meters"),
):
    """Write a builtin track's map, centerline and waypoints."""
    try:
        files = write_track(build_track(name, TrackShape(half_width=half_width)), output_dir)
    except PlannerError as e:
        _fail(e)

    console.print(f"[green]Map:[/green] {files.map_path}")
    console.print(f"[green]Centerline:[/green] {files.centerline_path}")
    console.print(f"[green]Waypoints:[/green] {files.waypoints_path}")


if __name__ == "__main__":
    app()
