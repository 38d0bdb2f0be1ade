"""
Evaluation metrics.

Point metrics (MSE, MAE), the short-term forecasting family (SMAPE, MAPE,
MASE, OWA), point-adjusted anomaly precision/recall/F1 and classification
accuracy, plus the JSON-serializable MetricReport.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from sklearn.metrics import accuracy_score, precision_recall_fscore_support

from .errors import MetricsError, ShapeError

# Terms whose denominator falls below this contribute 0.
DENOMINATOR_GUARD = 1e-12


def _pair(truth: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape:
        raise ShapeError(f"truth {truth.shape} and prediction {pred.shape} differ")
    if truth.size == 0:
        raise MetricsError("metrics need at least one value")
    return truth, pred


def mse_mae(truth: np.ndarray, pred: np.ndarray) -> tuple[float, float]:
    truth, pred = _pair(truth, pred)
    err = pred - truth
    return float(np.mean(err**2)), float(np.mean(np.abs(err)))


def _smape(truth: np.ndarray, pred: np.ndarray) -> float:
    denom = np.abs(truth) + np.abs(pred)
    safe = np.where(denom < DENOMINATOR_GUARD, 1.0, denom)
    terms = np.where(denom < DENOMINATOR_GUARD, 0.0, np.abs(truth - pred) / safe)
    return float(200.0 * terms.mean())


def _mape(truth: np.ndarray, pred: np.ndarray) -> float:
    denom = np.abs(truth)
    safe = np.where(denom < DENOMINATOR_GUARD, 1.0, denom)
    terms = np.where(denom < DENOMINATOR_GUARD, 0.0, np.abs(truth - pred) / safe)
    return float(100.0 * terms.mean())


def _mase(truth: np.ndarray, pred: np.ndarray, insample: np.ndarray, q: int) -> float:
    """Mean over series of (mean absolute error / in-sample seasonal-naive MAE)."""
    errors = np.abs(truth - pred).reshape(truth.shape[0], -1).mean(axis=0)
    diffs = np.abs(insample[q:] - insample[:-q]).reshape(insample.shape[0] - q, -1)
    scale = diffs.mean(axis=0)
    if np.any(scale < DENOMINATOR_GUARD):
        raise MetricsError(f"MASE is undefined: in-sample series is constant at lag q={q}")
    return float((errors / scale).mean())


def seasonal_naive(insample: np.ndarray, horizon: int, q: int) -> np.ndarray:
    """Repeat the last in-sample season of length ``q`` over ``horizon`` steps."""
    insample = np.asarray(insample, dtype=np.float64)
    if q < 1 or insample.shape[0] < q:
        raise MetricsError(f"seasonal naive needs 1 <= q <= {insample.shape[0]}, got q={q}")
    last = insample[-q:]
    return last[np.arange(horizon) % q]


def smape_mape_mase_owa(
    truth: np.ndarray,
    pred: np.ndarray,
    insample: np.ndarray,
    q: int,
    naive2: np.ndarray | None = None,
) -> dict[str, float]:
    """
    Short-term forecasting metrics.

    Args:
        truth: Actual future values, time on axis 0.
        pred: Forecast, same shape as ``truth``.
        insample: History before the forecast window, time on axis 0, same
            trailing shape as ``truth``.
        q: Seasonality used by MASE and the default baseline.
        naive2: Baseline forecast for OWA; defaults to the seasonal naive forecast.

    Returns:
        Mapping with keys ``smape``, ``mape``, ``mase`` and ``owa``.

    Raises:
        MetricsError: MASE or OWA is undefined for these inputs.
    """
    truth, pred = _pair(truth, pred)
    insample = np.asarray(insample, dtype=np.float64)
    if q < 1:
        raise MetricsError(f"seasonality q must be >= 1, got {q}")
    if insample.shape[0] <= q:
        raise MetricsError(f"in-sample length {insample.shape[0]} must exceed q={q}")
    if insample.shape[1:] != truth.shape[1:]:
        raise ShapeError(f"in-sample {insample.shape} does not match truth {truth.shape}")
    baseline = seasonal_naive(insample, truth.shape[0], q) if naive2 is None else naive2
    _, baseline = _pair(pred, baseline)

    smape = _smape(truth, pred)
    mase = _mase(truth, pred, insample, q)
    base_smape = _smape(truth, baseline)
    base_mase = _mase(truth, baseline, insample, q)
    if base_smape < DENOMINATOR_GUARD or base_mase < DENOMINATOR_GUARD:
        raise MetricsError("OWA is undefined: the baseline forecast is perfect")
    return {
        "smape": smape,
        "mape": _mape(truth, pred),
        "mase": mase,
        "owa": 0.5 * (smape / base_smape + mase / base_mase),
    }


def point_adjust(truth: np.ndarray, raw_pred: np.ndarray) -> np.ndarray:
    """Flag a whole true anomaly segment when any point inside it was flagged."""
    truth = np.asarray(truth, dtype=bool)
    pred = np.asarray(raw_pred, dtype=bool)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ShapeError(f"timelines must be 1-D and equal length: {truth.shape} vs {pred.shape}")

    edges = np.diff(np.concatenate([[0], truth.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    adjusted = pred.copy()
    for start, end in zip(starts, ends):
        if pred[start:end].any():
            adjusted[start:end] = True
    return adjusted


def precision_recall_f1(truth: np.ndarray, pred: np.ndarray) -> tuple[float, float, float]:
    """Pointwise P/R/F1 for the positive class, 0/0 counted as 0."""
    precision, recall, f1, _ = precision_recall_fscore_support(
        np.asarray(truth, dtype=int),
        np.asarray(pred, dtype=int),
        labels=[1],
        average=None,
        zero_division=0,
    )
    return float(precision[0]), float(recall[0]), float(f1[0])


def point_adjust_f1(truth: np.ndarray, raw_pred: np.ndarray) -> tuple[float, float, float]:
    return precision_recall_f1(truth, point_adjust(truth, raw_pred))


def accuracy(labels: np.ndarray, predicted: np.ndarray) -> float:
    labels, predicted = np.asarray(labels), np.asarray(predicted)
    if labels.shape != predicted.shape:
        raise ShapeError(f"labels {labels.shape} and predictions {predicted.shape} differ")
    return float(accuracy_score(labels, predicted))


@dataclass(frozen=True)
class MetricReport:
    """Named scalar metrics of one evaluation run."""

    task: str
    metrics: dict[str, float]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        bad = [name for name, value in self.metrics.items() if not math.isfinite(value)]
        if bad:
            raise MetricsError(f"non-finite metrics: {', '.join(bad)}")

    def __getitem__(self, name: str) -> float:
        return self.metrics[name]

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "metrics": {name: float(value) for name, value in self.metrics.items()},
            "counts": {name: int(value) for name, value in self.counts.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MetricReport:
        return cls(task=data["task"], metrics=dict(data["metrics"]), counts=dict(data["counts"]))
