"""Synthetic series with known periodic structure."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class Tone:
    """A sinusoid making ``frequency`` full cycles over the generated length."""

    frequency: float
    amplitude: float = 1.0
    phase: float = 0.0


@dataclass(frozen=True)
class SyntheticSeries:
    """Generated values plus the parameters that produced them."""

    values: np.ndarray
    tones: tuple[Tone, ...]
    trend_slope: float
    noise_sigma: float
    seed: int
    labels: np.ndarray | None = field(default=None)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    def tone_periods(self) -> list[float]:
        """Period of each tone in time steps, strongest tone first."""
        ordered = sorted(self.tones, key=lambda tone: -abs(tone.amplitude))
        return [self.length / tone.frequency for tone in ordered]

    def window_frequencies(self, window: int) -> list[int]:
        """DFT bin of each tone inside a window of ``window`` steps, strongest first."""
        return [round(window / period) for period in self.tone_periods()]

    def metadata(self) -> dict[str, Any]:
        return {
            "length": self.length,
            "channels": self.values.shape[1],
            "tones": [vars(tone) for tone in self.tones],
            "trend_slope": self.trend_slope,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }


def gen_multiperiod(
    length: int,
    channels: int,
    tones: Sequence[Tone | tuple[float, float, float]],
    trend_slope: float = 0.0,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> SyntheticSeries:
    """
    Sum of sinusoids, a linear trend and Gaussian noise.

    Channel c shifts every tone's phase by c * pi / 4 so channels are not identical.
    """
    if length < 1 or channels < 1:
        raise DataError(f"need length >= 1 and channels >= 1, got {length} x {channels}")
    tones = tuple(t if isinstance(t, Tone) else Tone(*t) for t in tones)
    freqs = [t.frequency for t in tones]
    if len(set(freqs)) != len(freqs):
        raise DataError(f"tone frequencies must be distinct, got {freqs}")

    t = np.arange(length, dtype=np.float64)[:, None]
    shift = np.arange(channels, dtype=np.float64)[None, :] * (math.pi / 4)
    values = np.zeros((length, channels)) + trend_slope * t
    for tone in tones:
        angle = 2 * math.pi * tone.frequency * t / length + tone.phase + shift
        values += tone.amplitude * np.sin(angle)
    if noise_sigma > 0.0:
        values += np.random.default_rng(seed).normal(0.0, noise_sigma, size=values.shape)
    return SyntheticSeries(values, tones, trend_slope, noise_sigma, seed)


def inject_anomalies(
    series: SyntheticSeries,
    segments: int,
    min_len: int = 3,
    max_len: int = 10,
    magnitude: float = 3.0,
    start: int = 0,
    seed: int = 0,
) -> SyntheticSeries:
    """Add level shifts on random disjoint segments after ``start``; labels mark them."""
    rng = np.random.default_rng(seed)
    values = series.values.copy()
    labels = np.zeros(series.length, dtype=bool)
    attempts = 0
    placed = 0
    while placed < segments:
        attempts += 1
        if attempts > 100 * max(segments, 1):
            raise DataError(f"could not place {segments} disjoint anomaly segments")
        width = int(rng.integers(min_len, max_len + 1))
        if series.length - width <= start:
            raise DataError("series too short for the requested anomaly segments")
        begin = int(rng.integers(start, series.length - width))
        # keep a one-step gap so segments stay separate
        lo, hi = max(begin - 1, 0), min(begin + width + 1, series.length)
        if labels[lo:hi].any():
            continue
        sign = 1.0 if rng.random() < 0.5 else -1.0
        values[begin : begin + width] += sign * magnitude
        labels[begin : begin + width] = True
        placed += 1
    return SyntheticSeries(
        values, series.tones, series.trend_slope, series.noise_sigma, series.seed, labels
    )


def gen_period_classes(
    samples_per_class: int,
    length: int,
    periods: Sequence[float] = (8.0, 16.0),
    noise_sigma: float = 0.05,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Single-channel sines whose class is their period.

    Amplitude and phase are random per sample, so only the period separates
    the classes.

    Returns:
        Windows of shape (n, length, 1) and integer labels of shape (n,),
        interleaved by class.
    """
    if samples_per_class < 1 or len(periods) < 2:
        raise DataError("need >= 1 sample per class and >= 2 classes")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    windows, labels = [], []
    for _ in range(samples_per_class):
        for label, period in enumerate(periods):
            amplitude = rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2 * math.pi)
            wave = amplitude * np.sin(2 * math.pi * t / period + phase)
            windows.append(wave + rng.normal(0.0, noise_sigma, size=length))
            labels.append(label)
    return np.asarray(windows)[:, :, None], np.asarray(labels, dtype=np.intp)
