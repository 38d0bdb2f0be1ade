"""Dataset manifests: where a series comes from and how it is windowed."""

from __future__ import annotations

import configparser
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ConfigurationError, DataError
from .loading import load_csv, load_labelled_csv
from .synthetic import SyntheticSeries, Tone, gen_multiperiod, inject_anomalies
from .windowing import split_bounds


def parse_tones(text: str) -> tuple[Tone, ...]:
    """Parse ``"freq:amp:phase, freq:amp"`` into tones (amplitude and phase optional)."""
    tones = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        try:
            values = [float(v) for v in item.split(":")]
        except ValueError as e:
            raise ConfigurationError(f"bad tone {item!r}; expected freq[:amp[:phase]]") from e
        if not 1 <= len(values) <= 3:
            raise ConfigurationError(f"bad tone {item!r}; expected freq[:amp[:phase]]")
        tones.append(Tone(*values))
    return tuple(tones)


@dataclass(frozen=True)
class DatasetManifest:
    """
    A CSV source or a synthetic generator, plus window geometry and splits.

    ``csv`` wins over the generator when both are set.
    """

    csv: str | None = None
    has_header: bool = True
    time_column: str | None = None
    label_column: str | None = None
    length: int = 2000
    channels: int = 1
    tones: str = "20:1.0:0, 50:0.5:0"
    trend_slope: float = 0.0
    noise_sigma: float = 0.1
    input_len: int = 96
    target_len: int = 24
    stride: int = 1
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    anomalies: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_len < 4:
            raise ConfigurationError(f"input_len must be >= 4, got {self.input_len}")
        if self.target_len < 1 or self.stride < 1:
            raise ConfigurationError("target_len and stride must be >= 1")
        if self.anomalies < 0:
            raise ConfigurationError(f"anomalies must be >= 0, got {self.anomalies}")
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"split fractions must sum to 1, got {total}")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return self.train_fraction, self.val_fraction, self.test_fraction

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(
        cls, values: Mapping[str, str], base: DatasetManifest | None = None
    ) -> DatasetManifest:
        """Overlay string settings (e.g. an INI section) on ``base`` or the defaults."""
        current = asdict(base or cls())
        known = {f.name: f for f in fields(cls)}
        for key, raw in values.items():
            if key not in known:
                raise ConfigurationError(f"unknown dataset key {key!r}")
            kind = str if current[key] is None else type(current[key])
            current[key] = coerce_setting(key, raw, kind)
        return cls(**current)

    def _synthetic(self) -> SyntheticSeries:
        tones = parse_tones(self.tones)
        if not tones and self.trend_slope == 0.0 and self.noise_sigma == 0.0:
            raise DataError("synthetic manifest produces an all-zero series")
        return gen_multiperiod(
            self.length, self.channels, tones, self.trend_slope, self.noise_sigma, self.seed
        )

    def load(self) -> np.ndarray:
        """The full (T_total, C) series."""
        return self.load_labelled()[0]

    def load_labelled(self) -> tuple[np.ndarray, np.ndarray | None]:
        """
        The series and its anomaly label timeline, if the source has one.

        Synthetic anomalies are injected into the test split only.
        """
        if self.csv:
            if self.label_column is None:
                return load_csv(self.csv, self.has_header, self.time_column), None
            return load_labelled_csv(
                self.csv, self.label_column, self.has_header, self.time_column
            )
        series = self._synthetic()
        if self.anomalies == 0:
            return series.values, None
        test_start = split_bounds(series.length, self.fractions)[2][0]
        injected = inject_anomalies(series, self.anomalies, start=test_start, seed=self.seed + 1)
        return injected.values, injected.labels


def coerce_setting(key: str, raw: Any, kind: type) -> Any:
    """Read an INI string as ``kind``; an empty string becomes None."""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind is bool:
            if text.lower() not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(text)
            return text.lower() in ("true", "yes", "1", "on")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError as e:
        raise ConfigurationError(f"{key}: cannot read {raw!r} as {kind.__name__}") from e
    return text or None


def read_manifests(path: str | Path) -> dict[str, DatasetManifest]:
    """Every section of an INI manifest file, one dataset per section."""
    parser = configparser.ConfigParser()
    try:
        found = parser.read(path)
    except configparser.Error as e:
        raise ConfigurationError(f"{path}: {e}") from e
    if not found:
        raise ConfigurationError(f"manifest not found: {path}")
    return {name: DatasetManifest.from_mapping(parser[name]) for name in parser.sections()}
