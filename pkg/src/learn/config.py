from dataclasses import asdict, dataclass

from src.errors import ConfigurationError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    max_grad_norm: float = 0.5
    update_epochs: int = 4
    num_minibatches: int = 4
    n_envs: int = 4
    n_steps: int = 128
    total_timesteps: int = 50_000
    seed: int = 0
    vf_coef: float = 0.5
    ent_coef: float = 0.0
    normalize_advantages: bool = True
    anneal_lr: bool = False
    hidden_sizes: tuple[int, ...] = (256, 256, 256, 256)

    def __post_init__(self) -> None:
        positive = (
            "learning_rate",
            "gamma",
            "gae_lambda",
            "clip_eps",
            "max_grad_norm",
            "update_epochs",
            "num_minibatches",
            "n_envs",
            "n_steps",
            "total_timesteps",
        )
        bad = [name for name in positive if not getattr(self, name) > 0]
        if not 0.0 < self.clip_eps < 1.0:
            bad.append("clip_eps")
        if self.gamma > 1.0:
            bad.append("gamma")
        if self.gae_lambda > 1.0:
            bad.append("gae_lambda")
        if self.vf_coef < 0.0 or self.ent_coef < 0.0:
            bad.append("vf_coef/ent_coef")
        if not self.hidden_sizes or any(size <= 0 for size in self.hidden_sizes):
            bad.append("hidden_sizes")
        if self.num_minibatches > self.batch_size:
            bad.append("num_minibatches")
        if bad:
            raise ConfigurationError("invalid training settings", fields=sorted(set(bad)))

    @property
    def batch_size(self) -> int:
        return self.n_envs * self.n_steps

    @property
    def minibatch_size(self) -> int:
        return self.batch_size // self.num_minibatches

    @property
    def num_updates(self) -> int:
        return max(1, self.total_timesteps // self.batch_size)

    def to_dict(self) -> dict[str, object]:
        return asdict(self)
