"""Differentiable training objectives."""

import numpy as np

from ..errors import TrainingError
from ..numerics import ops
from ..numerics.tensor import Tensor

SMAPE_GUARD = 1e-12


def mse(pred: Tensor, target: np.ndarray, weight: np.ndarray | None = None) -> Tensor:
    """
    Mean squared error, optionally restricted to positions where ``weight`` is nonzero.

    With a weight the result is sum(w * err**2) / sum(w).
    """
    target = np.asarray(target, dtype=np.float64)
    err = ops.square(ops.sub(pred, Tensor(target)))
    if weight is None:
        return ops.mean(err)
    weight = np.broadcast_to(np.asarray(weight, dtype=np.float64), err.shape)
    norm = float(weight.sum())
    if norm <= 0.0:
        raise TrainingError("loss weight selects no positions")
    return ops.scale(ops.total(ops.mul(err, Tensor(weight))), 1.0 / norm)


def smape(pred: Tensor, target: np.ndarray) -> Tensor:
    """SMAPE in percent; terms with |target| + |pred| below the guard contribute 0."""
    target = np.asarray(target, dtype=np.float64)
    denom = np.abs(target) + np.abs(pred.data)
    guarded = (denom < SMAPE_GUARD).astype(np.float64)

    numerator = ops.mul(ops.absolute(ops.sub(pred, Tensor(target))), Tensor(1.0 - guarded))
    denominator = ops.add(ops.add(ops.absolute(pred), Tensor(np.abs(target))), Tensor(guarded))
    return ops.scale(ops.mean(ops.div(numerator, denominator)), 200.0)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    return ops.cross_entropy(logits, labels)
