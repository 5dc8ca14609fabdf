"""Policy checkpoints.

A checkpoint is a short text header followed by little-endian float64 payload:

    format_version 1
    input_dim 129
    action_dim 10
    actor_layers 129x256,256x256,256x256,256x256,256x10
    critic_layers 129x256,256x256,256x256,256x256,256x1
    end_header

The payload holds, in order, every actor weight and bias, ``log_std``, then every critic weight and bias.
"""

from pathlib import Path

import numpy as np
import structlog

from src.errors import CheckpointError, DimensionError
from src.learn.mlp import MlpParams
from src.learn.policy import PolicyParams

logger = structlog.get_logger(__name__)

FORMAT_VERSION = 1
END_HEADER = b"end_header\n"
DTYPE = np.dtype("<f8")


def _format_layers(params: MlpParams) -> str:
    return ",".join(f"{rows}x{cols}" for rows, cols in params.layer_shapes)


def _parse_layers(text: str) -> list[tuple[int, int]]:
    shapes = []
    for item in text.split(","):
        rows, _, cols = item.partition("x")
        shapes.append((int(rows), int(cols)))
    return shapes


def save_checkpoint(policy: PolicyParams, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (
        f"format_version {FORMAT_VERSION}\n"
        f"input_dim {policy.observation_dim}\n"
        f"action_dim {policy.action_dim}\n"
        f"actor_layers {_format_layers(policy.actor)}\n"
        f"critic_layers {_format_layers(policy.critic)}\n"
    ).encode("ascii")
    payload = b"".join(np.ascontiguousarray(p, dtype=DTYPE).tobytes() for p in policy.parameters())
    path.write_bytes(header + END_HEADER + payload)
    logger.debug("checkpoint_saved", path=str(path), bytes=len(payload))
    return path


def _read_mlp(payload: memoryview, offset: int, shapes: list[tuple[int, int]]) -> tuple[MlpParams, int]:
    weights, biases = [], []
    for rows, cols in shapes:
        w = np.frombuffer(payload, dtype=DTYPE, count=rows * cols, offset=offset).reshape(rows, cols)
        offset += rows * cols * DTYPE.itemsize
        b = np.frombuffer(payload, dtype=DTYPE, count=cols, offset=offset)
        offset += cols * DTYPE.itemsize
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    return MlpParams(weights, biases), offset


def load_checkpoint(
    path: Path | str, expected_input_dim: int | None = None, expected_action_dim: int | None = None
) -> PolicyParams:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"{path}: checkpoint not found")
    raw = path.read_bytes()
    split = raw.find(END_HEADER)
    if split < 0:
        raise CheckpointError(f"{path}: missing header terminator")

    header: dict[str, str] = {}
    for line in raw[:split].decode("ascii", errors="replace").splitlines():
        key, _, value = line.partition(" ")
        header[key] = value.strip()
    try:
        version = int(header["format_version"])
        input_dim = int(header["input_dim"])
        action_dim = int(header["action_dim"])
        actor_shapes = _parse_layers(header["actor_layers"])
        critic_shapes = _parse_layers(header["critic_layers"])
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"{path}: malformed header ({e})") from e
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format_version expected {FORMAT_VERSION}, found {version}")
    if expected_input_dim is not None and input_dim != expected_input_dim:
        raise DimensionError("checkpoint input_dim", expected_input_dim, input_dim)
    if expected_action_dim is not None and action_dim != expected_action_dim:
        raise DimensionError("checkpoint action_dim", expected_action_dim, action_dim)

    count = sum(r * c + c for r, c in actor_shapes) + action_dim + sum(r * c + c for r, c in critic_shapes)
    payload = memoryview(raw)[split + len(END_HEADER) :]
    if len(payload) != count * DTYPE.itemsize:
        raise CheckpointError(
            f"{path}: truncated or oversized payload, expected {count * DTYPE.itemsize} bytes, found {len(payload)}"
        )

    try:
        actor, offset = _read_mlp(payload, 0, actor_shapes)
        log_std = np.frombuffer(payload, dtype=DTYPE, count=action_dim, offset=offset).astype(np.float64)
        offset += action_dim * DTYPE.itemsize
        critic, _ = _read_mlp(payload, offset, critic_shapes)
        policy = PolicyParams(actor=actor, log_std=log_std, critic=critic)
    except (DimensionError, ValueError) as e:
        raise CheckpointError(f"{path}: inconsistent layer shapes ({e})") from e
    if policy.observation_dim != input_dim or policy.action_dim != action_dim:
        raise CheckpointError(
            f"{path}: header dims ({input_dim}, {action_dim}) disagree with layers "
            f"({policy.observation_dim}, {policy.action_dim})"
        )
    return policy
