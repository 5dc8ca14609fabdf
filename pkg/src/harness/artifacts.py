"""Semicolon-separated CSV artifacts written into every run directory, with matching readers."""

import csv
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from src.errors import ConfigurationError, TrackFormatError

CONFIG_FILE = "config.yaml"
RETURNS_FILE = "returns.csv"
LOSSES_FILE = "losses.csv"
SUMMARY_FILE = "summary.csv"
CHECKPOINT_DIR = "checkpoints"
EPISODE_DIR = "episodes"
RETURNS_HEADER = ["step", "episodic_return"]


@dataclass
class RunArtifacts:
    output_dir: Path
    config_path: Path
    returns_path: Path | None = None
    losses_path: Path | None = None
    summary_path: Path | None = None
    checkpoints: list[Path] = field(default_factory=list)
    episodes: list[Path] = field(default_factory=list)
    extra: list[Path] = field(default_factory=list)


def _format(value: object) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter=";", lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    return path


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.is_file():
        raise ConfigurationError(f"missing artifact {path.name} in {path.parent}", fields=[str(path)])
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter=";")
        header = next(reader, None)
        if header is None:
            raise TrackFormatError(path, "empty file", line=1)
        rows = []
        for line_number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise TrackFormatError(path, f"expected {len(header)} fields, found {len(row)}", line=line_number)
            rows.append(row)
    return header, rows


def write_returns(path: Path, returns: Iterable[tuple[int, float]]) -> Path:
    return write_table(path, RETURNS_HEADER, ((int(step), float(value)) for step, value in returns))


def read_returns(path: Path) -> list[tuple[int, float]]:
    header, rows = read_table(path)
    if header != RETURNS_HEADER:
        raise TrackFormatError(path, f"expected header {';'.join(RETURNS_HEADER)}", line=1)
    try:
        return [(int(step), float(value)) for step, value in rows]
    except ValueError as e:
        raise TrackFormatError(path, str(e)) from e


def write_rows(path: Path, rows: list[dict[str, float]]) -> Path:
    """Dict rows sharing one key order, e.g. per-update losses."""
    header = list(rows[0]) if rows else ["step"]
    return write_table(path, header, ([row[key] for key in header] for row in rows))


def read_rows(path: Path) -> list[dict[str, float]]:
    header, rows = read_table(path)
    try:
        return [{key: float(value) for key, value in zip(header, row)} for row in rows]
    except ValueError as e:
        raise TrackFormatError(path, str(e)) from e


def write_summary(path: Path, summary: dict[str, float]) -> Path:
    return write_table(path, ["metric", "value"], summary.items())


def read_summary(path: Path) -> dict[str, float]:
    _, rows = read_table(path)
    try:
        return {metric: float(value) for metric, value in rows}
    except ValueError as e:
        raise TrackFormatError(path, str(e)) from e
