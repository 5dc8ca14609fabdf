from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from src.config import settings
from src.errors import ConfigurationError
from src.harness import artifacts

logger = structlog.get_logger(__name__)

MERGED_FILE = "merged_returns.csv"
SUMMARY_FILE = "comparison_summary.csv"
SUMMARY_HEADER = ["run", "episodes", "final_step", "final_moving_average", "steps_to_threshold"]


@dataclass(frozen=True)
class RunSummary:
    run: str
    episodes: int
    final_step: int
    final_moving_average: float
    steps_to_threshold: int | None

    def as_row(self) -> list[object]:
        return [self.run, self.episodes, self.final_step, self.final_moving_average, self.steps_to_threshold]


@dataclass
class Comparison:
    steps: list[int]
    columns: dict[str, list[float | None]]
    summaries: list[RunSummary]


def moving_average(values: list[float], window: int) -> list[float]:
    window = max(1, window)
    return [float(np.mean(values[max(0, i + 1 - window) : i + 1])) for i in range(len(values))]


def summarize_returns(
    name: str, returns: list[tuple[int, float]], window: int, threshold: float | None
) -> RunSummary:
    if not returns:
        return RunSummary(name, 0, 0, float("nan"), None)
    averaged = moving_average([r for _, r in returns], window)
    reached = None
    if threshold is not None:
        reached = next((step for (step, _), avg in zip(returns, averaged) if avg >= threshold), None)
    return RunSummary(name, len(returns), returns[-1][0], averaged[-1], reached)


def _unique_names(run_dirs: list[Path]) -> list[str]:
    names: list[str] = []
    for directory in run_dirs:
        name = directory.name or str(directory)
        candidate, suffix = name, 2
        while candidate in names:
            candidate = f"{name}_{suffix}"
            suffix += 1
        names.append(candidate)
    return names


def compare_runs(
    run_dirs: list[Path],
    output_dir: Path | None = None,
    window: int | None = None,
    threshold: float | None = None,
) -> Comparison:
    """Merge return curves on a shared step axis; episodes ending on the same step are averaged."""
    if not run_dirs:
        raise ConfigurationError("compare needs at least one run directory", fields=["runs"])
    window = window or settings.return_window
    names = _unique_names(run_dirs)

    per_run: dict[str, dict[int, float]] = {}
    summaries = []
    for name, directory in zip(names, run_dirs):
        path = directory / artifacts.RETURNS_FILE
        if not path.is_file():
            raise ConfigurationError(f"no {artifacts.RETURNS_FILE} in run directory {directory}", fields=["runs"])
        returns = artifacts.read_returns(path)
        grouped: dict[int, list[float]] = defaultdict(list)
        for step, value in returns:
            grouped[step].append(value)
        per_run[name] = {step: float(np.mean(values)) for step, values in grouped.items()}
        summaries.append(summarize_returns(name, returns, window, threshold))

    steps = sorted({step for curve in per_run.values() for step in curve})
    columns = {name: [per_run[name].get(step) for step in steps] for name in names}
    comparison = Comparison(steps=steps, columns=columns, summaries=summaries)

    if output_dir is not None:
        artifacts.write_table(
            output_dir / MERGED_FILE,
            ["step", *names],
            ([step, *(columns[name][i] for name in names)] for i, step in enumerate(steps)),
        )
        artifacts.write_table(output_dir / SUMMARY_FILE, SUMMARY_HEADER, (s.as_row() for s in summaries))
        logger.info("comparison_written", output_dir=str(output_dir), runs=len(names), steps=len(steps))
    return comparison
