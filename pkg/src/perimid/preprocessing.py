"""Instance normalization, moving-average decomposition and pre-interpolation.

Series arrays are laid out as (..., L, C): time on the second-to-last axis,
channels last, any number of leading batch axes.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import PreprocessingError, ShapeError

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-5
DEFAULT_KERNEL = 25


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and (floored) standard deviation, shape (..., C)."""

    mu: np.ndarray
    sigma: np.ndarray

    @property
    def channels(self) -> int:
        return self.mu.shape[-1]


@dataclass(frozen=True)
class DecompositionResult:
    """Seasonal and trend parts; ``seasonal + trend`` reconstructs the input."""

    seasonal: np.ndarray
    trend: np.ndarray


def _as_series(x: np.ndarray, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim < 2:
        raise ShapeError(f"{name} must have shape (..., L, C), got {arr.shape}")
    return arr


def normalize(x: np.ndarray) -> tuple[np.ndarray, NormStats]:
    """Zero-mean, unit-variance scaling per channel (population variance)."""
    x = _as_series(x)
    if x.shape[-2] < 2:
        raise PreprocessingError(f"normalize needs L >= 2, got L={x.shape[-2]}")
    mu = x.mean(axis=-2)
    std = x.std(axis=-2)
    floored = std < SIGMA_FLOOR
    if floored.any():
        logger.debug(f"sigma floored to {SIGMA_FLOOR} for {int(floored.sum())} channel(s)")
    sigma = np.maximum(std, SIGMA_FLOOR)
    normed = (x - mu[..., None, :]) / sigma[..., None, :]
    return normed, NormStats(mu=mu, sigma=sigma)


def denormalize(y: np.ndarray, stats: NormStats) -> np.ndarray:
    """Elementwise sigma * y + mu."""
    y = _as_series(y, "y")
    if y.shape[-1] != stats.channels:
        raise ShapeError(f"channel mismatch: y has {y.shape[-1]}, stats have {stats.channels}")
    return y * stats.sigma[..., None, :] + stats.mu[..., None, :]


def decompose(x: np.ndarray, kernel: int = DEFAULT_KERNEL) -> DecompositionResult:
    """
    Split a series into trend (centered moving average) and seasonal (remainder).

    The series is edge-padded with (kernel - 1) / 2 copies of its first and
    last values so the trend keeps length L.
    """
    x = _as_series(x)
    length = x.shape[-2]
    if kernel < 1 or kernel % 2 == 0:
        raise PreprocessingError(f"moving-average kernel must be odd and positive, got {kernel}")
    if kernel > 2 * length - 1:
        raise PreprocessingError(f"kernel {kernel} exceeds 2L-1 = {2 * length - 1}")

    half = (kernel - 1) // 2
    pad = [(0, 0)] * x.ndim
    pad[-2] = (half, half)
    padded = np.pad(x, pad, mode="edge")
    trend = sliding_window_view(padded, kernel, axis=-2).mean(axis=-1)
    return DecompositionResult(seasonal=x - trend, trend=trend)


def pre_interpolate(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """
    Fill missing points from their nearest observed neighbours.

    A missing point takes the mean of the nearest observed values before and
    after it, or the single nearest observed value at either end. Only
    observed points are ever used as neighbours, so the result does not depend
    on fill order.

    Args:
        x: Series of shape (..., L, C); values at missing positions are ignored.
        mask: Boolean array of the same shape, True where a point is missing.
    """
    x = _as_series(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match series {x.shape}")

    length, channels = x.shape[-2:]
    flat_x = x.reshape(-1, length, channels)
    flat_mask = mask.reshape(-1, length, channels)
    out = flat_x.copy()

    for b in range(flat_x.shape[0]):
        for c in range(channels):
            missing = np.flatnonzero(flat_mask[b, :, c])
            if missing.size == 0:
                continue
            observed = np.flatnonzero(~flat_mask[b, :, c])
            if observed.size == 0:
                raise PreprocessingError(f"channel {c} has no observed points")
            values = flat_x[b, observed, c]

            # insertion point of each gap among the observed indices
            pos = np.searchsorted(observed, missing)
            has_before = pos > 0
            has_after = pos < observed.size
            before = values[np.clip(pos - 1, 0, observed.size - 1)]
            after = values[np.clip(pos, 0, observed.size - 1)]
            filled = np.where(
                has_before & has_after,
                (before + after) / 2.0,
                np.where(has_before, before, after),
            )
            out[b, missing, c] = filled

    return out.reshape(x.shape)
