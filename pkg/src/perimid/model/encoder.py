"""Stacked pre-norm transformer layers with periodic-pyramid attention masking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, PyramidError
from ..numerics import ops
from ..numerics.tensor import Tensor
from ..pyramid import PyramidTokens
from .layers import Layer, LayerNorm, Linear, dropout


# Additive logit for disallowed pairs; finite so gradients stay finite.
MASK_FILL = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 1
    d_model: int = 16
    heads: int = 4
    ff_mult: int = 4
    dropout: float = 0.1
    layer_norm: bool = True

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ConfigurationError(f"layers must be >= 1, got {self.layers}")
        if self.d_model < 1 or self.heads < 1 or self.d_model % self.heads:
            raise ConfigurationError(
                f"d_model ({self.d_model}) must be a positive multiple of heads ({self.heads})"
            )
        if self.ff_mult < 1:
            raise ConfigurationError(f"ff_mult must be >= 1, got {self.ff_mult}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must lie in [0, 1), got {self.dropout}")

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads


class AttentionParams(Layer):
    def __init__(self, d_model: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.query = self.add_child("query", Linear(d_model, d_model, rng))
        self.key = self.add_child("key", Linear(d_model, d_model, rng, bias=False))
        self.value = self.add_child("value", Linear(d_model, d_model, rng))
        self.output = self.add_child("output", Linear(d_model, d_model, rng))


class EncoderLayer(Layer):
    def __init__(self, config: EncoderConfig, rng: np.random.Generator) -> None:
        super().__init__()
        width = config.d_model
        self.norm_attention = self.add_child("norm_attention", LayerNorm(width))
        self.attention = self.add_child("attention", AttentionParams(width, rng))
        self.norm_ff = self.add_child("norm_ff", LayerNorm(width))
        self.ff_in = self.add_child("ff_in", Linear(width, config.ff_mult * width, rng))
        self.ff_out = self.add_child("ff_out", Linear(config.ff_mult * width, width, rng))


class EncoderState(Layer):
    """Per-layer parameter sets of the encoder."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator) -> None:
        super().__init__()
        self.layers = [
            self.add_child(f"layer{i}", EncoderLayer(config, rng)) for i in range(config.layers)
        ]


def attention_bias(mask: np.ndarray) -> np.ndarray:
    """0 where attention is allowed, MASK_FILL elsewhere."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
        raise PyramidError(f"attention mask must be square, got {mask.shape}")
    if not mask.any(axis=1).all():
        raise PyramidError("attention mask has a row with no allowed entries")
    return np.where(mask, 0.0, MASK_FILL)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    batch, n_tokens, width = x.shape
    split = ops.reshape(x, (batch, n_tokens, heads, width // heads))
    return ops.transpose(split, (0, 2, 1, 3))


def ppam_attention(
    tokens: Tensor,
    mask: np.ndarray | None,
    params: AttentionParams,
    heads: int,
    *,
    weights_out: list[np.ndarray] | None = None,
) -> Tensor:
    """
    Multi-head self-attention restricted to the allowed pairs of ``mask``.

    Args:
        tokens: (N, d_model) or (B, N, d_model).
        mask: Boolean N x N allowed-attention matrix; None means unmasked.
        params: Query/key/value/output projections.
        heads: Number of heads; d_k = d_model / heads.
        weights_out: If given, the (B, heads, N, N) attention weights are appended.
    """
    squeeze = tokens.ndim == 2
    x = ops.reshape(tokens, (1, *tokens.shape)) if squeeze else tokens
    batch, n_tokens, width = x.shape

    q = _split_heads(params.query(x), heads)
    k = _split_heads(params.key(x), heads)
    v = _split_heads(params.value(x), heads)

    scores = ops.scale(ops.matmul(q, ops.swap_last(k)), 1.0 / math.sqrt(width // heads))
    if mask is not None:
        if mask.shape != (n_tokens, n_tokens):
            raise PyramidError(f"mask {mask.shape} does not match {n_tokens} tokens")
        scores = ops.add(scores, Tensor(attention_bias(mask)))
    weights = ops.softmax_lastdim(scores)
    if weights_out is not None:
        weights_out.append(weights.numpy())

    context = ops.transpose(ops.matmul(weights, v), (0, 2, 1, 3))
    out = params.output(ops.reshape(context, (batch, n_tokens, width)))
    return ops.reshape(out, tokens.shape) if squeeze else out


def encode(
    tokens: PyramidTokens,
    config: EncoderConfig,
    state: EncoderState,
    *,
    rng: np.random.Generator | None = None,
    attention_maps: list[np.ndarray] | None = None,
) -> Tensor:
    """
    Run every encoder layer over the pyramid tokens.

    Each layer is: pre-norm, masked attention, residual add, pre-norm,
    GELU feed-forward, residual add. Dropout is active only when ``rng`` is given.
    """
    h = tokens.tokens
    for layer in state.layers:
        a = layer.norm_attention(h) if config.layer_norm else h
        a = ppam_attention(
            a, tokens.mask, layer.attention, config.heads, weights_out=attention_maps
        )
        h = ops.add(h, dropout(a, config.dropout, rng))

        f = layer.norm_ff(h) if config.layer_norm else h
        f = layer.ff_out(ops.gelu(layer.ff_in(f)))
        h = ops.add(h, dropout(f, config.dropout, rng))
    return h
