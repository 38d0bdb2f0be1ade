"""Parameter containers: linear maps, layer norm, token embedding, dropout."""

from __future__ import annotations

import math

import numpy as np

from ..errors import PyramidError
from ..numerics import ops
from ..numerics.tensor import Tensor


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Layer:
    """Owns named parameter tensors and child layers, in declaration order."""

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Layer] = {}

    def add_param(self, name: str, values: np.ndarray) -> Tensor:
        tensor = Tensor(values, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def add_child(self, name: str, layer: Layer) -> Layer:
        self._children[name] = layer
        return layer

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        named = {f"{prefix}{name}": tensor for name, tensor in self._params.items()}
        for child_name, child in self._children.items():
            named.update(child.named_parameters(f"{prefix}{child_name}."))
        return named


class Linear(Layer):
    """y = x @ W + b with W of shape (in_features, out_features); b is optional."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        bias: bool = True,
    ) -> None:
        super().__init__()
        self.weight = self.add_param("weight", xavier_uniform(rng, in_features, out_features))
        self.bias = self.add_param("bias", np.zeros(out_features)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.matmul(x, self.weight)
        return out if self.bias is None else ops.add(out, self.bias)


class LayerNorm(Layer):
    def __init__(self, width: int) -> None:
        super().__init__()
        self.gain = self.add_param("gain", np.ones(width))
        self.bias = self.add_param("bias", np.zeros(width))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias)


class TokenEmbedding(Layer):
    """Shared L -> d_model projection of padded components plus learned per-slot positions."""

    def __init__(
        self, length: int, d_model: int, max_tokens: int, rng: np.random.Generator
    ) -> None:
        super().__init__()
        self.length = length
        self.max_tokens = max_tokens
        self.projection = self.add_child("projection", Linear(length, d_model, rng))
        self.positional = self.add_param(
            "positional", rng.normal(0.0, 0.02, size=(max_tokens, d_model))
        )

    def __call__(self, components: np.ndarray) -> Tensor:
        """Embed zero-padded components of shape (C, N, L) into (C, N, d_model)."""
        n_tokens = components.shape[-2]
        if n_tokens > self.max_tokens:
            raise PyramidError(f"{n_tokens} tokens exceed max_tokens={self.max_tokens}")
        projected = self.projection(Tensor(components))
        return ops.add(projected, ops.take(self.positional, np.arange(n_tokens), axis=0))


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0 or no generator is given."""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return ops.mul(x, Tensor(keep))
