from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray


def global_norm(grads: list[NDArray[np.float64]]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_grad_norm(grads: list[NDArray[np.float64]], max_norm: float) -> tuple[list[NDArray[np.float64]], float]:
    """Rescale all gradients together when their joint norm exceeds ``max_norm``; returns the pre-clip norm."""
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads, norm
    coef = max_norm / (norm + 1e-6)
    return [g * coef for g in grads], norm


@dataclass
class Adam:
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moments: list[NDArray[np.float64]] = field(default_factory=list, repr=False)
    second_moments: list[NDArray[np.float64]] = field(default_factory=list, repr=False)

    def reset(self) -> None:
        self.step_count = 0
        self.first_moments = []
        self.second_moments = []

    def step(self, params: list[NDArray[np.float64]], grads: list[NDArray[np.float64]]) -> None:
        """In-place update of ``params``."""
        if len(params) != len(grads):
            raise ValueError(f"expected {len(params)} gradients, got {len(grads)}")
        if not self.first_moments:
            self.first_moments = [np.zeros_like(p) for p in params]
            self.second_moments = [np.zeros_like(p) for p in params]
        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(params, grads, self.first_moments, self.second_moments):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
