"""Fully connected tanh networks with hand-written reverse mode.

Weights are stored ``(fan_in, fan_out)`` so a batch ``X`` of shape ``(B, fan_in)`` maps through ``X @ W + b``.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from src.errors import DimensionError


@dataclass
class MlpParams:
    weights: list[NDArray[np.float64]] = field(repr=False)
    biases: list[NDArray[np.float64]] = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("layers", "matching weight/bias lists", (len(self.weights), len(self.biases)))
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError(f"layer {i}", (w.shape[1],), b.shape)
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise DimensionError(f"layer {i} input", self.weights[i - 1].shape[1], w.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.weights[0].shape[0])

    @property
    def output_dim(self) -> int:
        return int(self.weights[-1].shape[1])

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(int(w.shape[0]), int(w.shape[1])) for w in self.weights]

    def parameters(self) -> list[NDArray[np.float64]]:
        """Arrays in storage order: W0, b0, W1, b1, ..."""
        out: list[NDArray[np.float64]] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def orthogonal(shape: tuple[int, int], gain: float, rng: np.random.Generator) -> NDArray[np.float64]:
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_mlp(sizes: list[int], rng: np.random.Generator, output_gain: float = 1.0) -> MlpParams:
    """Orthogonal weights (gain sqrt(2) on hidden layers, ``output_gain`` on the head) and zero biases."""
    if len(sizes) < 2:
        raise DimensionError("layer sizes", "at least input and output", len(sizes))
    weights = []
    biases = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = output_gain if i == len(sizes) - 2 else float(np.sqrt(2.0))
        weights.append(orthogonal((fan_in, fan_out), gain, rng))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def zeros_like(params: MlpParams) -> MlpParams:
    return MlpParams([np.zeros_like(w) for w in params.weights], [np.zeros_like(b) for b in params.biases])


def _as_batch(params: MlpParams, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != params.input_dim:
        raise DimensionError("network input", params.input_dim, x.shape[-1] if x.ndim else x.shape)
    return batch, single


def forward_with_cache(
    params: MlpParams, x: NDArray[np.float64]
) -> tuple[NDArray[np.float64], list[NDArray[np.float64]]]:
    """Output plus the input to every layer, batch-shaped."""
    h, _ = _as_batch(params, x)
    activations = [h]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if i == last else np.tanh(z)
        if i != last:
            activations.append(h)
    return h, activations


def forward(params: MlpParams, x: NDArray[np.float64]) -> NDArray[np.float64]:
    out, _ = forward_with_cache(params, x)
    return out[0] if np.asarray(x).ndim == 1 else out


def backward(
    params: MlpParams,
    x: NDArray[np.float64],
    grad_output: NDArray[np.float64],
    cache: list[NDArray[np.float64]] | None = None,
) -> MlpParams:
    """Gradients of ``sum(grad_output * forward(params, x))`` with respect to every weight and bias."""
    if cache is None:
        _, cache = forward_with_cache(params, x)
    g = np.asarray(grad_output, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != (cache[0].shape[0], params.output_dim):
        raise DimensionError("output gradient", (cache[0].shape[0], params.output_dim), g.shape)

    n_layers = len(params.weights)
    grad_w: list[NDArray[np.float64]] = [np.empty(0)] * n_layers
    grad_b: list[NDArray[np.float64]] = [np.empty(0)] * n_layers
    for i in range(n_layers - 1, -1, -1):
        h_in = cache[i]
        grad_w[i] = h_in.T @ g
        grad_b[i] = g.sum(axis=0)
        if i > 0:
            # h_in = tanh(z); dz = dh * (1 - h^2)
            g = (g @ params.weights[i].T) * (1.0 - h_in**2)
    return MlpParams(grad_w, grad_b)
