"""Sliding windows, contiguous splits and imputation masks."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DataError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class WindowSet:
    """
    Aligned model inputs and targets.

    ``inputs`` is (n, L, C). ``targets`` is (n, T, C) for reconstruction tasks
    or (n,) integer labels for classification. ``starts`` holds each window's
    first time index in the source series.
    """

    inputs: np.ndarray
    targets: np.ndarray
    starts: np.ndarray

    def __post_init__(self) -> None:
        if self.inputs.ndim != 3:
            raise DataError(f"inputs must be (n, L, C), got {self.inputs.shape}")
        if len(self.targets) != len(self.inputs) or len(self.starts) != len(self.inputs):
            raise DataError("inputs, targets and starts must have the same length")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def input_len(self) -> int:
        return self.inputs.shape[1]

    @property
    def channels(self) -> int:
        return self.inputs.shape[2]

    def subset(self, index: np.ndarray | Sequence[int]) -> WindowSet:
        index = np.asarray(index, dtype=np.intp)
        return WindowSet(self.inputs[index], self.targets[index], self.starts[index])

    @classmethod
    def labelled(cls, inputs: np.ndarray, labels: np.ndarray) -> WindowSet:
        inputs = np.asarray(inputs, dtype=np.float64)
        return cls(inputs, np.asarray(labels, dtype=np.intp), np.arange(len(inputs)))


def window(
    series: np.ndarray, input_len: int, target_len: int, stride: int = 1
) -> list[tuple[np.ndarray, np.ndarray]]:
    """
    Cut (input, target) pairs: input covers [s, s+L), target covers [s+L, s+L+T).

    Raises:
        DataError: the series is shorter than L + T, or a length is not positive.
    """
    windows = window_set(series, input_len, target_len, stride)
    return list(zip(windows.inputs, windows.targets))


def window_set(
    series: np.ndarray, input_len: int, target_len: int, stride: int = 1, offset: int = 0
) -> WindowSet:
    """``window`` as stacked arrays; ``offset`` is added to the recorded starts."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if input_len < 1 or target_len < 0 or stride < 1:
        raise DataError(f"invalid window geometry L={input_len} T={target_len} stride={stride}")
    span = input_len + target_len
    if span > x.shape[0]:
        raise DataError(f"series of length {x.shape[0]} is shorter than L+T = {span}")

    views = sliding_window_view(x, span, axis=0)[::stride]
    # views: (n, C, span) -> (n, span, C)
    stacked = np.ascontiguousarray(np.swapaxes(views, 1, 2))
    starts = np.arange(0, x.shape[0] - span + 1, stride) + offset
    return WindowSet(stacked[:, :input_len], stacked[:, input_len:], starts)


def split_bounds(total: int, fractions: Sequence[float]) -> list[tuple[int, int]]:
    """Contiguous [start, end) ranges for train/val/test."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(
            f"split fractions must be three non-negative values summing to 1, got {fractions}"
        )
    train_end = int(total * fractions[0])
    val_end = train_end + int(total * fractions[1])
    return [(0, train_end), (train_end, val_end), (val_end, total)]


def split_windows(
    series: np.ndarray,
    input_len: int,
    target_len: int,
    stride: int,
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
) -> dict[str, WindowSet]:
    """
    Split the series contiguously, then window each part on its own.

    No window crosses a split boundary. A part too short for one window is
    left out of the result.
    """
    x = np.asarray(series, dtype=np.float64)
    parts: dict[str, WindowSet] = {}
    for name, (start, end) in zip(SPLITS, split_bounds(x.shape[0], fractions)):
        if end - start >= input_len + target_len:
            parts[name] = window_set(x[start:end], input_len, target_len, stride, offset=start)
    if "train" not in parts:
        raise DataError("the training split is too short for a single window")
    return parts


def gen_mask(
    shape: tuple[int, ...], ratio: float, seed: int | np.random.Generator = 0
) -> np.ndarray:
    """
    Missing-point mask (True = missing) with exactly round(ratio * L) points per channel.

    Args:
        shape: (L, C) or (..., L, C); every channel of every leading index
            gets its own random draw.
        ratio: Fraction of time points to hide, in [0, 1).
        seed: Seed or generator.

    Raises:
        DataError: the ratio is out of range or would hide a whole channel.
    """
    if len(shape) < 2:
        raise DataError(f"mask shape must be (..., L, C), got {shape}")
    if not 0.0 <= ratio < 1.0:
        raise DataError(f"mask ratio must lie in [0, 1), got {ratio}")
    length = shape[-2]
    count = int(round(ratio * length))
    if count >= length:
        raise DataError(f"ratio {ratio} masks all {length} points of a channel")

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lead = int(np.prod(shape[:-2], dtype=np.int64))
    channels = shape[-1]
    # rank random keys per channel; the `count` smallest are hidden
    keys = rng.random((lead, channels, length))
    order = np.argsort(keys, axis=-1)
    hidden = np.zeros((lead, channels, length), dtype=bool)
    np.put_along_axis(hidden, order[..., :count], True, axis=-1)
    return np.swapaxes(hidden, 1, 2).reshape(shape)


def split_reconstruction(
    series: np.ndarray,
    length: int,
    stride: int,
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
) -> dict[str, WindowSet]:
    """``split_windows`` for tasks whose target is the input window itself."""
    parts = split_windows(series, length, 0, stride, fractions)
    return {
        name: WindowSet(part.inputs, part.inputs.copy(), part.starts)
        for name, part in parts.items()
    }
