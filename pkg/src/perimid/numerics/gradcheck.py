"""Finite-difference verification of tape gradients."""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence

import numpy as np

from ..errors import NumericsError
from .tensor import GradTape, Tensor

logger = logging.getLogger(__name__)

EPS_RANGE = (1e-7, 1e-3)
DENOM_FLOOR = 1e-12


def _named(params: Sequence[Tensor] | Mapping[str, Tensor]) -> dict[str, Tensor]:
    if isinstance(params, Mapping):
        return dict(params)
    return {p.name or f"param{i}": p for i, p in enumerate(params)}


def gradient_errors(
    f: Callable[[], Tensor],
    params: Sequence[Tensor] | Mapping[str, Tensor],
    eps: float = 1e-6,
) -> dict[str, float]:
    """
    Compare analytic gradients against central differences, per parameter block.

    Args:
        f: Zero-argument function returning a scalar tensor; it must read the
            current values of ``params`` on every call.
        params: Tensors to check (names are used as report keys).
        eps: Central-difference step.

    Returns:
        Mapping of block name to ||analytic - numeric|| / (||numeric|| + 1e-12).
    """
    low, high = EPS_RANGE
    if not low <= eps <= high:
        raise NumericsError(f"eps must lie in [{low}, {high}], got {eps}")

    named = _named(params)
    with GradTape() as tape:
        out = f()
    if out.size != 1:
        raise NumericsError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    analytic = tape.gradient(out, list(named.values()))

    errors: dict[str, float] = {}
    for (name, param), grad in zip(named.items(), analytic):
        original = param.numpy()
        numeric = np.zeros(param.shape)
        try:
            for i in range(param.size):
                bumped = original.copy()
                bumped.flat[i] += eps
                param.assign(bumped)
                f_plus = f().item()
                bumped.flat[i] = original.flat[i] - eps
                param.assign(bumped)
                f_minus = f().item()
                numeric.flat[i] = (f_plus - f_minus) / (2.0 * eps)
        finally:
            param.assign(original)
        diff = float(np.linalg.norm(grad - numeric))
        errors[name] = diff / (float(np.linalg.norm(numeric)) + DENOM_FLOOR)
        logger.debug(f"grad check {name}: rel err {errors[name]:.3e}")
    return errors


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor] | Mapping[str, Tensor],
    eps: float = 1e-6,
) -> float:
    """Maximum relative gradient error over all parameter blocks."""
    errors = gradient_errors(f, params, eps)
    return max(errors.values(), default=0.0)
