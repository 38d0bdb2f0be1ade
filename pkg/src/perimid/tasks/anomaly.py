"""Reconstruction-based anomaly detection with a training-error quantile threshold."""

import logging

import numpy as np
import pandas as pd

from ..data.manifest import DatasetManifest
from ..data.windowing import WindowSet, split_bounds, split_reconstruction
from ..errors import DataError, ShapeError
from ..metrics import MetricReport, point_adjust, point_adjust_f1, precision_recall_f1
from ..model.network import PyramidTransformer
from ..numerics.tensor import Tensor
from ..training import losses
from .base import Task, TaskSpec, map_windows

logger = logging.getLogger(__name__)


def anomaly_scores(model: PyramidTransformer, windows: np.ndarray, agg: str = "mean") -> np.ndarray:
    """Per-point squared reconstruction error, aggregated over channels: (n, L, C) -> (n, L)."""
    recon = map_windows(model.predict, np.asarray(windows, dtype=np.float64))
    err = (recon - windows) ** 2
    return err.max(axis=-1) if agg == "max" else err.mean(axis=-1)


def anomaly_threshold(model: PyramidTransformer, train: np.ndarray, spec: TaskSpec) -> float:
    """The ``spec.threshold_quantile`` quantile of the training scores."""
    return float(
        np.quantile(anomaly_scores(model, train, spec.score_agg), spec.threshold_quantile)
    )


def flag_anomalies(
    train: np.ndarray, test: np.ndarray, spec: TaskSpec, model: PyramidTransformer
) -> tuple[np.ndarray, float]:
    """Raw (m, L) flags for ``test`` and the threshold they were cut at."""
    threshold = anomaly_threshold(model, train, spec)
    return anomaly_scores(model, test, spec.score_agg) > threshold, threshold


def detect_anomalies(
    train: np.ndarray,
    test: np.ndarray,
    labels: np.ndarray,
    spec: TaskSpec,
    model: PyramidTransformer,
) -> MetricReport:
    """
    Flag test points whose error exceeds the training-error quantile, then
    point-adjust and score against ``labels``.

    Args:
        train: Normal windows used to calibrate the threshold, (n, L, C).
        test: Windows to score, (m, L, C).
        labels: True anomaly flags for the test points, (m, L).
        spec: Supplies the threshold quantile and channel aggregation.
        model: Reconstruction model trained on normal data.
    """
    train = np.asarray(train, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if len(train) == 0:
        raise DataError("anomaly detection needs a non-empty training set")
    if labels.shape != test.shape[:2]:
        raise ShapeError(f"labels {labels.shape} do not match test windows {test.shape[:2]}")

    raw, threshold = flag_anomalies(train, test, spec, model)
    return _report(raw, labels, threshold, len(test))


def _report(raw: np.ndarray, labels: np.ndarray, threshold: float, windows: int) -> MetricReport:
    truth = labels.reshape(-1)
    raw = raw.reshape(-1)
    precision, recall, f1 = point_adjust_f1(truth, raw)
    raw_precision, raw_recall, raw_f1 = precision_recall_f1(truth, raw)
    logger.info(f"anomaly threshold {threshold:.4g}: F1 {f1:.3f} (raw {raw_f1:.3f})")
    return MetricReport(
        task="anomaly",
        metrics={
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "raw_precision": raw_precision,
            "raw_recall": raw_recall,
            "raw_f1": raw_f1,
            "threshold": threshold,
        },
        counts={"windows": windows, "points": int(truth.size), "anomalies": int(truth.sum())},
    )


class AnomalyTask(Task):
    @property
    def name(self) -> str:
        return "anomaly"

    @property
    def default_loss(self) -> str:
        return "mse"

    def datasets(self, manifest: DatasetManifest) -> dict[str, WindowSet]:
        """
        Overlapping reconstruction windows on train/val; non-overlapping test
        windows whose targets are the (n, L) label timelines.
        """
        series, labels = manifest.load_labelled()
        if labels is None:
            raise DataError("anomaly detection needs labels (label_column or anomalies > 0)")
        length = self.spec.input_len
        parts = split_reconstruction(series, length, manifest.stride, manifest.fractions)
        start, end = split_bounds(len(series), manifest.fractions)[2]
        count = (end - start) // length
        if count == 0:
            raise DataError(f"test split of {end - start} points is shorter than L={length}")
        starts = start + length * np.arange(count)
        index = starts[:, None] + np.arange(length)[None, :]
        parts["test"] = WindowSet(series[index], labels[index], starts)
        return parts

    def loss(self, model, inputs, targets, rng, loss_name) -> Tensor:
        self.resolve_loss(loss_name)
        return losses.mse(model.forward(inputs, rng), targets)

    def evaluate(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> MetricReport:
        if reference is None:
            raise DataError("anomaly evaluation needs the training windows as reference")
        self.prepare(model, reference)
        return detect_anomalies(
            reference.inputs, windows.inputs, windows.targets, self.spec, model
        )

    def plot_frame(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> pd.DataFrame:
        if reference is None:
            raise DataError("anomaly plots need the training windows as reference")
        threshold = anomaly_threshold(model, reference.inputs, self.spec)
        scores = anomaly_scores(model, windows.inputs, self.spec.score_agg).reshape(-1)
        truth = np.asarray(windows.targets, dtype=bool).reshape(-1)
        t = (windows.starts[:, None] + np.arange(windows.input_len)[None, :]).reshape(-1)
        return pd.DataFrame(
            {
                "t": t,
                "score": scores,
                "label": truth.astype(int),
                "predicted": point_adjust(truth, scores > threshold).astype(int),
            }
        )
