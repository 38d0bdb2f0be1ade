"""Adam with bias correction and global-norm gradient clipping."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from ..numerics.tensor import Tensor
from .config import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class Moments:
    """First and second moment estimates keyed by parameter name."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> Moments:
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
        )


def _check_grads(grads: Mapping[str, np.ndarray]) -> None:
    bad = [name for name, g in grads.items() if not np.isfinite(g).all()]
    if bad:
        raise TrainingError(f"non-finite gradient in {', '.join(bad)}")


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    moments: Moments,
    config: TrainConfig,
    t: int,
) -> tuple[dict[str, np.ndarray], Moments]:
    """
    One bias-corrected Adam update; inputs are left untouched.

    Args:
        params: Current parameter values by name.
        grads: Gradients with the same names and shapes.
        moments: Moment estimates after step ``t - 1``.
        config: Supplies lr, betas and eps.
        t: Step number, starting at 1.

    Returns:
        Updated parameters and moments.
    """
    if t < 1:
        raise TrainingError(f"Adam step counter starts at 1, got {t}")
    _check_grads(grads)
    beta1, beta2 = config.betas
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t

    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = grads[name]
        m = beta1 * moments.m.get(name, np.zeros_like(value)) + (1.0 - beta1) * g
        v = beta2 * moments.v.get(name, np.zeros_like(value)) + (1.0 - beta2) * (g * g)
        new_params[name] = value - config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
        new_m[name], new_v[name] = m, v
    return new_params, Moments(m=new_m, v=new_v)


def clip_by_global_norm(
    grads: Mapping[str, np.ndarray], max_norm: float
) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients together so their joint L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm <= max_norm:
        return dict(grads), norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


class Adam:
    """Applies ``adam_step`` to a model's named parameter tensors."""

    def __init__(self, params: Mapping[str, Tensor], config: TrainConfig) -> None:
        self.params = dict(params)
        self.config = config
        self.moments = Moments.zeros_like({n: p.data for n, p in self.params.items()})
        self.t = 0

    def step(self, grads: Mapping[str, np.ndarray]) -> float:
        """Clip, update and write back. Returns the pre-clipping gradient norm."""
        _check_grads(grads)
        clipped, norm = clip_by_global_norm(grads, self.config.clip_norm)
        if norm > self.config.clip_norm:
            logger.debug(f"clipped gradient norm {norm:.3g} to {self.config.clip_norm}")
        self.t += 1
        values = {name: p.data for name, p in self.params.items()}
        updated, self.moments = adam_step(values, clipped, self.moments, self.config, self.t)
        for name, tensor in self.params.items():
            tensor.assign(updated[name])
        return norm
