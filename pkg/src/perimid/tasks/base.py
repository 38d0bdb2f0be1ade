from __future__ import annotations

import os
from abc import ABC, abstractmethod
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
import pandas as pd

from ..data.manifest import DatasetManifest
from ..data.windowing import WindowSet, split_windows
from ..errors import ConfigurationError
from ..metrics import MetricReport
from ..model.network import ModelConfig, ModelShape, PyramidTransformer
from ..numerics.tensor import Tensor


TASK_KINDS = ("forecast", "impute", "anomaly", "classify")
SCORE_AGGREGATIONS = ("mean", "max")
EVAL_CHUNK = 32


@dataclass(frozen=True)
class TaskSpec:
    """
    What to solve. ``target_len`` only matters for forecasting; imputation and
    anomaly detection reconstruct the input (T = L).
    """

    kind: str = "forecast"
    input_len: int = 96
    target_len: int = 24
    num_classes: int = 2
    mask_ratio: float = 0.25
    threshold_quantile: float = 0.99
    score_agg: str = "mean"
    pre_interpolation: bool = True
    seasonality: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            available = ", ".join(TASK_KINDS)
            raise ConfigurationError(f"unknown task {self.kind!r}. Available: {available}")
        if self.input_len < 4:
            raise ConfigurationError(f"input_len must be >= 4, got {self.input_len}")
        if self.kind == "forecast" and self.target_len < 1:
            raise ConfigurationError(f"forecast needs target_len >= 1, got {self.target_len}")
        if self.kind == "classify" and self.num_classes < 2:
            raise ConfigurationError(f"classify needs num_classes >= 2, got {self.num_classes}")
        if self.kind == "impute" and not 0.0 < self.mask_ratio < 1.0:
            raise ConfigurationError(f"mask_ratio must lie in (0, 1), got {self.mask_ratio}")
        if not 0.0 < self.threshold_quantile <= 1.0:
            raise ConfigurationError(
                f"threshold_quantile must lie in (0, 1], got {self.threshold_quantile}"
            )
        if self.score_agg not in SCORE_AGGREGATIONS:
            raise ConfigurationError(f"score_agg must be one of {SCORE_AGGREGATIONS}")
        if self.seasonality is not None and self.seasonality < 1:
            raise ConfigurationError(f"seasonality must be >= 1, got {self.seasonality}")

    @property
    def output_len(self) -> int:
        return self.target_len if self.kind == "forecast" else self.input_len

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def thread_limit() -> int:
    """Evaluation worker count: PERIMID_THREADS if set, else min(4, CPU count)."""
    raw = os.environ.get("PERIMID_THREADS")
    if raw is None:
        return max(1, min(4, os.cpu_count() or 1))
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigurationError(f"PERIMID_THREADS must be an integer, got {raw!r}") from e
    if value < 1:
        raise ConfigurationError(f"PERIMID_THREADS must be >= 1, got {value}")
    return value


def map_windows(fn: Callable[[np.ndarray], np.ndarray], inputs: np.ndarray) -> np.ndarray:
    """Apply ``fn`` to chunks of windows on a thread pool; results keep input order."""
    chunks = [inputs[i : i + EVAL_CHUNK] for i in range(0, len(inputs), EVAL_CHUNK)]
    workers = min(thread_limit(), len(chunks))
    if workers <= 1:
        return np.concatenate([fn(chunk) for chunk in chunks], axis=0)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(fn, chunks)), axis=0)


class Task(ABC):
    """Abstract base class for the analysis tasks."""

    def __init__(self, spec: TaskSpec) -> None:
        if spec.kind != self.name:
            raise ConfigurationError(f"{type(self).__name__} cannot run a {spec.kind!r} spec")
        self.spec = spec

    @property
    @abstractmethod
    def name(self) -> str:
        """Task identifier (e.g., 'forecast')."""
        pass

    @property
    @abstractmethod
    def default_loss(self) -> str:
        """Training objective used when the run does not choose one."""
        pass

    @property
    def allowed_losses(self) -> tuple[str, ...]:
        """Training objectives this task can be trained with."""
        return (self.default_loss,)

    def resolve_loss(self, loss_name: str | None) -> str:
        """The objective a run trains with; ``None`` picks the default."""
        if loss_name is None:
            return self.default_loss
        if loss_name not in self.allowed_losses:
            available = ", ".join(self.allowed_losses)
            raise ConfigurationError(
                f"{self.name} cannot train with loss {loss_name!r}. Available: {available}"
            )
        return loss_name

    def model_shape(self, channels: int) -> ModelShape:
        return ModelShape(
            kind=self.name,
            input_len=self.spec.input_len,
            target_len=self.spec.output_len,
            channels=channels,
            num_classes=self.spec.num_classes if self.name == "classify" else 0,
        )

    def build_model(self, config: ModelConfig, channels: int, seed: int = 0) -> PyramidTransformer:
        return PyramidTransformer(config, self.model_shape(channels), seed=seed)

    def prepare(self, model: PyramidTransformer, windows: WindowSet) -> None:
        """Settle frozen periods before inference fans out across threads."""
        if model.config.freeze_periods and model.frozen_periods is None and len(windows):
            model.predict(windows.inputs[:1])

    def datasets(self, manifest: DatasetManifest) -> dict[str, WindowSet]:
        """Train/val/test window sets for this task from a manifest."""
        return split_windows(
            manifest.load(),
            self.spec.input_len,
            self.spec.target_len,
            manifest.stride,
            manifest.fractions,
        )

    @abstractmethod
    def loss(
        self,
        model: PyramidTransformer,
        inputs: np.ndarray,
        targets: np.ndarray,
        rng: np.random.Generator | None,
        loss_name: str,
    ) -> Tensor:
        """Differentiable mini-batch loss."""
        pass

    @abstractmethod
    def evaluate(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> MetricReport:
        """
        Score a frozen model on held-out windows.

        ``reference`` carries the training windows for tasks that calibrate on
        them (anomaly thresholds).
        """
        pass

    @abstractmethod
    def plot_frame(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> pd.DataFrame:
        """Plot-ready columns for the first evaluated window (or whole timeline)."""
        pass


def truth_pred_frame(truth: np.ndarray, pred: np.ndarray) -> pd.DataFrame:
    """(t, truth_c..., pred_c...) columns for one (T, C) window."""
    columns: dict[str, np.ndarray] = {"t": np.arange(truth.shape[0])}
    for c in range(truth.shape[1]):
        columns[f"truth_{c}"] = truth[:, c]
    for c in range(pred.shape[1]):
        columns[f"pred_{c}"] = pred[:, c]
    return pd.DataFrame(columns)
