from dataclasses import asdict, dataclass
from typing import Any

from ..errors import ConfigurationError

LR_RANGE = (1e-5, 1e-2)
LOSSES = ("mse", "smape", "cross_entropy")


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimizer and loop settings. ``lr = 0`` freezes the parameters; ``loss = None``
    uses the task default.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 10
    loss: str | None = None
    seed: int = 0
    max_steps: int | None = None
    clip_norm: float = 5.0

    def __post_init__(self) -> None:
        if self.lr != 0.0 and not LR_RANGE[0] <= self.lr <= LR_RANGE[1]:
            raise ConfigurationError(f"lr must be 0 or lie in {list(LR_RANGE)}, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if self.eps <= 0.0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError("batch_size and epochs must be >= 1")
        if self.loss is not None and self.loss not in LOSSES:
            raise ConfigurationError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.clip_norm <= 0.0:
            raise ConfigurationError(f"clip_norm must be positive, got {self.clip_norm}")

    @property
    def betas(self) -> tuple[float, float]:
        return self.beta1, self.beta2

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)
