"""The assembled model: periods, pyramid, encoder and task heads on top of preprocessing."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from ..errors import ConfigurationError, ShapeError
from ..numerics import ops
from ..numerics.tensor import Tensor
from ..preprocessing import DEFAULT_KERNEL, decompose, normalize
from ..pyramid import (
    PeriodicPyramid,
    PyramidTokens,
    build_pyramid,
    max_token_count,
    padded_components,
)
from ..spectral import PeriodSet, amplitude_spectrum, patch_periods, select_periods
from .encoder import EncoderConfig, EncoderState, encode
from .flows import DEFAULT_MAX_FLOWS, FeatureFlow, FlowHead, aggregate_flows, enumerate_flows
from .layers import Layer, Linear, TokenEmbedding

logger = logging.getLogger(__name__)

ATTENTION_MODES = ("ppam", "full")
AGGREGATION_MODES = ("flows", "flatten")
PARTITION_MODES = ("periodic", "patch")
RECONSTRUCTION_KINDS = ("forecast", "impute", "anomaly")


@dataclass(frozen=True)
class ModelConfig:
    """
    Architecture hyper-parameters.

    ``attention``, ``aggregation`` and ``partition`` select the ablation
    variants: full attention among all components, flattened token heads
    instead of feature flows, and spectrum-independent patch pyramids.
    """

    k: int = 3
    d_model: int = 16
    layers: int = 1
    heads: int = 4
    ff_mult: int = 4
    dropout: float = 0.1
    kernel: int = DEFAULT_KERNEL
    layer_norm: bool = True
    attention: str = "ppam"
    aggregation: str = "flows"
    partition: str = "periodic"
    freeze_periods: bool = False
    max_flows: int = DEFAULT_MAX_FLOWS

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigurationError(f"k must be >= 2, got {self.k}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigurationError(f"kernel must be odd and positive, got {self.kernel}")
        if self.attention not in ATTENTION_MODES:
            raise ConfigurationError(f"attention must be one of {ATTENTION_MODES}")
        if self.aggregation not in AGGREGATION_MODES:
            raise ConfigurationError(f"aggregation must be one of {AGGREGATION_MODES}")
        if self.partition not in PARTITION_MODES:
            raise ConfigurationError(f"partition must be one of {PARTITION_MODES}")
        if self.max_flows < 1:
            raise ConfigurationError(f"max_flows must be >= 1, got {self.max_flows}")
        # validates layers/heads/d_model/dropout
        self.encoder()

    def encoder(self) -> EncoderConfig:
        return EncoderConfig(
            layers=self.layers,
            d_model=self.d_model,
            heads=self.heads,
            ff_mult=self.ff_mult,
            dropout=self.dropout,
            layer_norm=self.layer_norm,
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ModelShape:
    """Everything besides ModelConfig that fixes parameter shapes."""

    kind: str
    input_len: int
    target_len: int
    channels: int
    num_classes: int = 0

    def __post_init__(self) -> None:
        if self.input_len < 4:
            raise ConfigurationError(f"input_len must be >= 4, got {self.input_len}")
        if self.target_len < 1:
            raise ConfigurationError(f"target_len must be >= 1, got {self.target_len}")
        if self.channels < 1:
            raise ConfigurationError(f"channels must be >= 1, got {self.channels}")
        if self.kind == "classify" and self.num_classes < 2:
            raise ConfigurationError(f"classification needs >= 2 classes, got {self.num_classes}")
        if self.kind not in (*RECONSTRUCTION_KINDS, "classify"):
            raise ConfigurationError(f"unknown task kind {self.kind!r}")


@dataclass(frozen=True)
class PyramidStructure:
    pyramid: PeriodicPyramid
    mask: np.ndarray
    flows: tuple[FeatureFlow, ...] = field(default=())


@lru_cache(maxsize=512)
def _structure(
    length: int, periods: PeriodSet, full: bool, max_flows: int | None
) -> PyramidStructure:
    pyramid = build_pyramid(length, periods)
    mask = np.ones_like(pyramid.mask) if full else pyramid.mask.copy()
    mask.flags.writeable = False
    flows = ()
    if max_flows is not None:
        flows = tuple(enumerate_flows(pyramid.relation, pyramid.table, max_flows))
    return PyramidStructure(pyramid=pyramid, mask=mask, flows=flows)


def _patch_token_count(length: int, k: int) -> int:
    """Token count of the patch pyramid; raises SpectralError if L is too short."""
    return sum(math.ceil(length / p) for p in patch_periods(length, k).periods)


class PyramidTransformer(Layer):
    """
    Channel-independent periodic-pyramid transformer.

    Reconstruction kinds (forecast, impute, anomaly) map an (L, C) window to
    (T, C): seasonal part through pyramid, encoder and flow head, trend part
    through a linear L -> T map, then de-normalization. Classification embeds
    the normalized raw window and maps all encoded tokens to class logits.
    """

    def __init__(self, config: ModelConfig, shape: ModelShape, seed: int = 0) -> None:
        super().__init__()
        if config.kernel > 2 * shape.input_len - 1:
            raise ConfigurationError(
                f"kernel {config.kernel} is too wide for input_len {shape.input_len}"
            )
        self.config = config
        self.shape = shape
        self.encoder_config = config.encoder()
        self.frozen_periods: PeriodSet | None = None

        if config.partition == "patch":
            self.max_tokens = _patch_token_count(shape.input_len, config.k)
        else:
            self.max_tokens = max_token_count(shape.input_len, config.k)

        rng = np.random.default_rng(seed)
        d = config.d_model
        self.embedding = self.add_child(
            "embedding", TokenEmbedding(shape.input_len, d, self.max_tokens, rng)
        )
        self.encoder = self.add_child("encoder", EncoderState(self.encoder_config, rng))

        if shape.kind == "classify":
            self.class_head = self.add_child(
                "class_head", Linear(shape.channels * self.max_tokens * d, shape.num_classes, rng)
            )
        else:
            if config.aggregation == "flows":
                self.flow_head = self.add_child(
                    "flow_head", FlowHead(config.k, d, shape.target_len, rng)
                )
            else:
                self.flat_head = self.add_child(
                    "flat_head", Linear(self.max_tokens * d, shape.target_len, rng)
                )
            self.trend_head = self.add_child(
                "trend_head", Linear(shape.input_len, shape.target_len, rng)
            )
        logger.debug(
            f"model {shape.kind} L={shape.input_len} T={shape.target_len} C={shape.channels} "
            f"max_tokens={self.max_tokens} params={self.parameter_count()}"
        )

    def parameter_count(self) -> int:
        return sum(t.size for t in self.named_parameters().values())

    def freeze(self, periods: PeriodSet) -> None:
        """Reuse ``periods`` for every later window instead of detecting them."""
        periods.validate(self.shape.input_len)
        self.frozen_periods = periods

    def periods_for(self, series: np.ndarray) -> PeriodSet:
        """Period set used for one (L, C) window."""
        length = self.shape.input_len
        if self.config.partition == "patch":
            return patch_periods(length, self.config.k)
        if self.frozen_periods is not None:
            return self.frozen_periods
        periods = select_periods(amplitude_spectrum(series), self.config.k, length)
        if self.config.freeze_periods:
            logger.warning(f"freezing periods {periods.periods}; later windows reuse them")
            self.frozen_periods = periods
        return periods

    def structure(self, periods: PeriodSet) -> PyramidStructure:
        return _structure(
            self.shape.input_len,
            periods,
            self.config.attention == "full",
            self.config.max_flows if self.config.aggregation == "flows" else None,
        )

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        expected = (self.shape.input_len, self.shape.channels)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise ShapeError(f"expected windows of shape (B, *{expected}), got {x.shape}")
        return x

    def _encode_group(
        self,
        series: np.ndarray,
        periods: PeriodSet,
        rng: np.random.Generator | None,
        attention_maps: list[np.ndarray] | None,
    ) -> tuple[Tensor, PyramidStructure]:
        """Encode a (G, L, C) group sharing one period set into (G * C, N, d_model)."""
        struct = self.structure(periods)
        components = np.concatenate(
            [padded_components(window, struct.pyramid.table) for window in series], axis=0
        )
        tokens = PyramidTokens(
            tokens=self.embedding(components),
            mask=struct.mask,
            component_table=struct.pyramid.table,
        )
        encoded = encode(
            tokens, self.encoder_config, self.encoder, rng=rng, attention_maps=attention_maps
        )
        return encoded, struct

    def _flatten_tokens(self, encoded: Tensor) -> Tensor:
        """Zero-pad to max_tokens and flatten: (B, N, d) -> (B, max_tokens * d)."""
        batch, n_tokens, width = encoded.shape
        if n_tokens < self.max_tokens:
            pad = Tensor(np.zeros((batch, self.max_tokens - n_tokens, width)))
            encoded = ops.concat([encoded, pad], axis=1)
        return ops.reshape(encoded, (batch, self.max_tokens * width))

    def _grouped(self, windows: np.ndarray) -> dict[PeriodSet, list[int]]:
        groups: dict[PeriodSet, list[int]] = {}
        for i, window in enumerate(windows):
            groups.setdefault(self.periods_for(window), []).append(i)
        return groups

    @staticmethod
    def _restore_order(parts: list[Tensor], order: list[int]) -> Tensor:
        stacked = parts[0] if len(parts) == 1 else ops.concat(parts, axis=0)
        if order == sorted(order):
            return stacked
        return ops.take(stacked, np.argsort(order), axis=0)

    def forward(self, batch: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        """
        Reconstruction forward pass.

        Args:
            batch: Windows of shape (B, L, C) or a single (L, C) window.
            rng: Enables dropout when given (training only).

        Returns:
            Tensor of shape (B, T, C).
        """
        if self.shape.kind == "classify":
            raise ConfigurationError("forward() is for reconstruction tasks; use logits()")
        x = self._check_batch(batch)
        batch_size, _, channels = x.shape
        target = self.shape.target_len

        normed, stats = normalize(x)
        parts = decompose(normed, self.config.kernel)

        seasonal_parts, order = [], []
        for periods, members in self._grouped(parts.seasonal).items():
            encoded, struct = self._encode_group(parts.seasonal[members], periods, rng, None)
            if self.config.aggregation == "flows":
                seasonal = aggregate_flows(encoded, list(struct.flows), target, self.flow_head)
            else:
                seasonal = self.flat_head(self._flatten_tokens(encoded))
            seasonal_parts.append(ops.reshape(seasonal, (len(members), channels, target)))
            order.extend(members)
        seasonal = self._restore_order(seasonal_parts, order)

        trend = self.trend_head(Tensor(np.swapaxes(parts.trend, 1, 2)))
        y = ops.transpose(ops.add(seasonal, trend), (0, 2, 1))

        # sigma * y + mu, with the statistics as constants
        scale = np.ascontiguousarray(np.broadcast_to(stats.sigma[:, None, :], y.shape))
        shift = np.ascontiguousarray(np.broadcast_to(stats.mu[:, None, :], y.shape))
        return ops.add(ops.mul(y, Tensor(scale)), Tensor(shift))

    def logits(self, batch: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        """
        Classification forward pass: (B, L, C) -> (B, num_classes).

        No decomposition and no de-normalization; tokens are concatenated
        channel-major, then in canonical token order.
        """
        if self.shape.kind != "classify":
            raise ConfigurationError("logits() is only available for classification models")
        x = self._check_batch(batch)
        channels = x.shape[2]
        normed, _ = normalize(x)

        rows, order = [], []
        for periods, members in self._grouped(normed).items():
            encoded, _ = self._encode_group(normed[members], periods, rng, None)
            flat = self._flatten_tokens(encoded)
            width = flat.shape[1]
            rows.append(
                self.class_head(ops.reshape(flat, (len(members), channels * width)))
            )
            order.extend(members)
        return self._restore_order(rows, order)

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Deterministic inference as a plain array."""
        if self.shape.kind == "classify":
            return self.logits(batch).numpy()
        return self.forward(batch).numpy()


def attention_maps(
    model: PyramidTransformer, window: np.ndarray
) -> tuple[PeriodicPyramid, list[np.ndarray]]:
    """
    Attention weights of every layer for one (L, C) window.

    Returns:
        The window's pyramid and one (C, heads, N, N) array per layer.
    """
    x = model._check_batch(window)
    if x.shape[0] != 1:
        raise ShapeError("attention_maps takes a single window")
    normed, _ = normalize(x)
    if model.shape.kind == "classify":
        source = normed
    else:
        source = decompose(normed, model.config.kernel).seasonal
    periods = model.periods_for(source[0])
    maps: list[np.ndarray] = []
    _, struct = model._encode_group(source, periods, None, maps)
    return struct.pyramid, maps

