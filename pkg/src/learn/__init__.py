from src.learn.buffer import RolloutBuffer, compute_gae
from src.learn.checkpoint import load_checkpoint, save_checkpoint
from src.learn.config import TrainConfig
from src.learn.mlp import MlpParams, backward, forward, init_mlp
from src.learn.optim import Adam, clip_grad_norm, global_norm
from src.learn.policy import (
    ActionSample,
    PolicyParams,
    fresh_critic,
    gaussian_logprob_and_entropy,
    init_policy,
    sample_actions,
    squash,
)

__all__ = [
    "ActionSample",
    "Adam",
    "MlpParams",
    "PolicyParams",
    "RolloutBuffer",
    "TrainConfig",
    "backward",
    "clip_grad_norm",
    "compute_gae",
    "forward",
    "fresh_critic",
    "gaussian_logprob_and_entropy",
    "global_norm",
    "init_mlp",
    "init_policy",
    "load_checkpoint",
    "sample_actions",
    "save_checkpoint",
    "squash",
]
