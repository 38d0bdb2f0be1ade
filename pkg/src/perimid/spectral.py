"""Amplitude spectrum and top-k period selection."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import SpectralError
from .preprocessing import DEFAULT_KERNEL, decompose, normalize

logger = logging.getLogger(__name__)

MIN_LENGTH = 4


@dataclass(frozen=True)
class PeriodSet:
    """Selected frequencies (ascending, f_1 = 1) and their periods (descending)."""

    frequencies: tuple[int, ...]
    periods: tuple[int, ...]
    # amplitudes are diagnostic only; two sets with the same periods compare equal
    amplitudes: tuple[float, ...] = field(compare=False)

    @property
    def k(self) -> int:
        return len(self.frequencies)

    def validate(self, length: int) -> None:
        """Raise SpectralError unless this set is usable for series of ``length``."""
        if self.k < 2:
            raise SpectralError(f"a period set needs k >= 2, got {self.k}")
        if self.frequencies[0] != 1:
            raise SpectralError("the first frequency must be 1")
        if any(f > math.ceil(length / 2) for f in self.frequencies[1:]):
            raise SpectralError(f"frequencies must not exceed ceil(L/2) = {math.ceil(length / 2)}")
        if any(a >= b for a, b in zip(self.frequencies, self.frequencies[1:])):
            raise SpectralError("frequencies must be strictly ascending")
        if any(a <= b for a, b in zip(self.periods, self.periods[1:])):
            raise SpectralError("periods must be strictly descending")
        if self.periods[0] != length:
            raise SpectralError(f"period set was built for L={self.periods[0]}, not L={length}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "frequencies": list(self.frequencies),
            "periods": list(self.periods),
            "amplitudes": list(self.amplitudes),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PeriodSet":
        return cls(
            frequencies=tuple(int(f) for f in data["frequencies"]),
            periods=tuple(int(p) for p in data["periods"]),
            amplitudes=tuple(
                float(a) for a in data.get("amplitudes", [0.0] * len(data["periods"]))
            ),
        )


def amplitude_spectrum(x_s: np.ndarray) -> np.ndarray:
    """
    Channel-averaged DFT magnitudes for j in {0, ..., ceil(L/2)}.

    Args:
        x_s: Seasonal part, shape (L, C) or (..., L, C). Magnitudes are averaged
            over every axis except time.
    """
    x = np.asarray(x_s, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    length = x.shape[-2]
    if length < MIN_LENGTH:
        raise SpectralError(f"amplitude_spectrum needs L >= {MIN_LENGTH}, got {length}")

    magnitudes = np.abs(np.fft.fft(x, axis=-2))
    per_frequency = np.moveaxis(magnitudes, -2, 0).reshape(length, -1).mean(axis=1)
    return per_frequency[: math.ceil(length / 2) + 1]


def select_periods(amplitudes: np.ndarray, k: int, length: int) -> PeriodSet:
    """
    Pick f_1 = 1 plus the k-1 strongest frequencies in {2, ..., ceil(L/2)}.

    Ties go to the lower frequency. A candidate whose period ceil(L/f)
    duplicates an already chosen period is skipped.
    """
    if k < 2:
        raise SpectralError(f"k must be >= 2, got {k}")
    top = math.ceil(length / 2)
    amps = np.asarray(amplitudes, dtype=np.float64)
    if amps.shape[0] < top + 1:
        raise SpectralError(f"need {top + 1} amplitudes for L={length}, got {amps.shape[0]}")

    candidates = sorted(range(2, top + 1), key=lambda f: (-amps[f], f))
    chosen = {1: length}
    for freq in candidates:
        if len(chosen) == k:
            break
        period = math.ceil(length / freq)
        if period not in chosen.values():
            chosen[freq] = period
    if len(chosen) < k:
        raise SpectralError(
            f"k={k} exceeds the {len(chosen)} distinct periods available for L={length}"
        )

    freqs = sorted(chosen)
    return PeriodSet(
        frequencies=tuple(freqs),
        periods=tuple(chosen[f] for f in freqs),
        amplitudes=tuple(float(amps[f]) for f in freqs),
    )


def patch_periods(length: int, k: int) -> PeriodSet:
    """Spectrum-independent pyramid: level l uses patches of length ceil(L / 2**(l-1))."""
    if k < 2:
        raise SpectralError(f"k must be >= 2, got {k}")
    freqs = [2**level for level in range(k)]
    periods = [math.ceil(length / f) for f in freqs]
    if freqs[-1] > math.ceil(length / 2) or len(set(periods)) < k:
        raise SpectralError(f"L={length} is too short for a {k}-level patch pyramid")
    return PeriodSet(
        frequencies=tuple(freqs), periods=tuple(periods), amplitudes=tuple(0.0 for _ in freqs)
    )


def detect_periods(x: np.ndarray, k: int, kernel: int = DEFAULT_KERNEL) -> PeriodSet:
    """Normalize, decompose and select periods from the seasonal part of ``x`` (L x C)."""
    normed, _ = normalize(x)
    seasonal = decompose(normed, kernel).seasonal
    length = seasonal.shape[-2]
    periods = select_periods(amplitude_spectrum(seasonal), k, length)
    logger.debug(f"detected periods {periods.periods} (frequencies {periods.frequencies})")
    return periods
