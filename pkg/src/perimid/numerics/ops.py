"""Differentiable tensor operations.

Broadcasting is limited to adding (or subtracting) a tensor whose shape equals
the trailing dimensions of the other operand, e.g. a bias vector.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Any

import numpy as np

from ..errors import NumericsError, ShapeError
from .tensor import DTYPE, Tensor, as_tensor, make_result

GELU_COEF = math.sqrt(2.0 / math.pi)
LAYER_NORM_EPS = 1e-5


def _bias_axes(big: tuple[int, ...], small: tuple[int, ...], op: str) -> tuple[int, ...]:
    """Leading axes to sum over when ``small`` is broadcast onto ``big``."""
    if big == small:
        return ()
    if len(small) < len(big) and big[len(big) - len(small) :] == small:
        return tuple(range(len(big) - len(small)))
    raise ShapeError(f"{op}: shapes {big} and {small} are not compatible")


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return grad.sum(axis=tuple(range(grad.ndim - len(shape))))


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < b.ndim:
        a, b = b, a
    axes = _bias_axes(a.shape, b.shape, "add")

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g, g.sum(axis=axes) if axes else g

    return make_result("add", a.data + b.data, (a, b), backward)


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    axes = _bias_axes(a.shape, b.shape, "sub")

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g, -(g.sum(axis=axes) if axes else g)

    return make_result("sub", a.data - b.data, (a, b), backward)


def mul(a: Any, b: Any) -> Tensor:
    """Elementwise product of equally shaped tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    av, bv = a.data, b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g * bv, g * av

    return make_result("mul", av * bv, (a, b), backward)


def div(a: Any, b: Any) -> Tensor:
    """Elementwise quotient of equally shaped tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"div: shapes {a.shape} and {b.shape} differ")
    av, bv = a.data, b.data
    if np.any(bv == 0.0):
        raise NumericsError("div: division by zero")

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g / bv, -g * av / (bv * bv)

    return make_result("div", av / bv, (a, b), backward)


def scale(x: Any, factor: float) -> Tensor:
    x = as_tensor(x)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * factor,)

    return make_result("scale", x.data * factor, (x,), backward)


def square(x: Any) -> Tensor:
    x = as_tensor(x)
    xv = x.data

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (2.0 * g * xv,)

    return make_result("square", xv * xv, (x,), backward)


def absolute(x: Any) -> Tensor:
    x = as_tensor(x)
    xv = x.data

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * np.sign(xv),)

    return make_result("abs", np.abs(xv), (x,), backward)


def matmul(a: Any, b: Any) -> Tensor:
    """Matrix product over the last two axes; a 2-D operand is shared across batch axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands with >= 2 dims, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ for {a.shape} @ {b.shape}")
    if a.ndim > 2 and b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: batch dimensions differ for {a.shape} @ {b.shape}")
    av, bv = a.data, b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return _reduce_to(ga, av.shape), _reduce_to(gb, bv.shape)

    return make_result("matmul", av @ bv, (a, b), backward)


def transpose(x: Any, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.transpose(g, inverse),)

    return make_result("transpose", np.transpose(x.data, axes), (x,), backward)


def swap_last(x: Any) -> Tensor:
    x = as_tensor(x)
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def reshape(x: Any, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    original = x.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(original),)

    return make_result("reshape", x.data.reshape(tuple(shape)), (x,), backward)


def take(x: Any, indices: Sequence[int] | np.ndarray, axis: int) -> Tensor:
    """Gather slices along ``axis``; repeated indices accumulate gradient."""
    x = as_tensor(x)
    index = np.asarray(indices, dtype=np.intp)
    axis = axis % x.ndim

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(x.shape, dtype=DTYPE)
        np.add.at(np.moveaxis(grad, axis, 0), index, np.moveaxis(g, axis, 0))
        return (grad,)

    return make_result("take", np.take(x.data, index, axis=axis), (x,), backward)


def concat(tensors: Sequence[Any], axis: int) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    axis = axis % parts[0].ndim
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=axis)

    values = np.concatenate([p.data for p in parts], axis=axis)
    return make_result("concat", values, parts, backward)


def total(x: Any) -> Tensor:
    """Sum of all elements as a scalar tensor."""
    x = as_tensor(x)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result("sum", np.asarray(x.data.sum()), (x,), backward)


def mean(x: Any, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.size

        def backward_all(g: np.ndarray) -> tuple[np.ndarray]:
            return (np.full(x.shape, float(g) / count, dtype=DTYPE),)

        return make_result("mean", np.asarray(x.data.mean()), (x,), backward_all)

    axis = axis % x.ndim
    count = x.shape[axis]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape) / count,)

    return make_result("mean", x.data.mean(axis=axis), (x,), backward)


def softmax_lastdim(x: Any) -> Tensor:
    """Numerically stable softmax over the last axis."""
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ShapeError("softmax_lastdim needs a non-empty last dimension")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (probs * (g - (g * probs).sum(axis=-1, keepdims=True)),)

    return make_result("softmax", probs, (x,), backward)


def gelu(x: Any) -> Tensor:
    """GELU, tanh approximation."""
    x = as_tensor(x)
    xv = x.data
    inner = GELU_COEF * (xv + 0.044715 * xv**3)
    t = np.tanh(inner)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        d_inner = GELU_COEF * (1.0 + 3.0 * 0.044715 * xv**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t * t) * d_inner),)

    return make_result("gelu", 0.5 * xv * (1.0 + t), (x,), backward)


def layer_norm(x: Any, gain: Any, bias: Any, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis, then apply per-feature gain and bias."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(f"layer_norm: gain/bias must have shape ({width},)")
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    lead = tuple(range(x.ndim - 1))

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dxhat = g * gain.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return make_result("layer_norm", xhat * gain.data + bias.data, (x, gain, bias), backward)


def cross_entropy(logits: Any, labels: Sequence[int] | np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ShapeError("cross_entropy: label out of range")
    rows = np.arange(labels.size)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[rows, labels].mean()

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (grad * (float(g) / labels.size),)

    return make_result("cross_entropy", np.asarray(loss), (logits,), backward)
