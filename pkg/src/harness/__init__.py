from src.harness.artifacts import RunArtifacts, read_returns, read_rows, read_summary, write_returns
from src.harness.compare import Comparison, RunSummary, compare_runs, summarize_returns
from src.harness.config import ExperimentConfig, Mode, dump_experiment_config, load_experiment_config
from src.harness.runner import build_environment, load_run_track, optimize_raceline_file, run

__all__ = [
    "Comparison",
    "ExperimentConfig",
    "Mode",
    "RunArtifacts",
    "RunSummary",
    "build_environment",
    "compare_runs",
    "dump_experiment_config",
    "load_experiment_config",
    "load_run_track",
    "optimize_raceline_file",
    "read_returns",
    "read_rows",
    "read_summary",
    "run",
    "summarize_returns",
    "write_returns",
]
