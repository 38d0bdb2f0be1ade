import numpy as np
import pandas as pd

from ..data.windowing import WindowSet
from ..errors import ShapeError
from ..metrics import MetricReport, mse_mae, smape_mape_mase_owa
from ..model.network import PyramidTransformer
from ..numerics.tensor import Tensor
from ..training import losses
from .base import Task, TaskSpec, map_windows, truth_pred_frame


def forecast(x: np.ndarray, spec: TaskSpec, model: PyramidTransformer) -> np.ndarray:
    """Predict the T x C continuation of one L x C window."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != spec.input_len:
        raise ShapeError(f"forecast expects an ({spec.input_len}, C) window, got {x.shape}")
    return model.predict(x[None])[0]


class ForecastTask(Task):
    """Predict the next T points; reports MSE/MAE and, with a seasonality, SMAPE/MAPE/MASE/OWA."""

    @property
    def name(self) -> str:
        return "forecast"

    @property
    def default_loss(self) -> str:
        return "mse"

    @property
    def allowed_losses(self) -> tuple[str, ...]:
        return ("mse", "smape")

    def loss(self, model, inputs, targets, rng, loss_name) -> Tensor:
        loss_name = self.resolve_loss(loss_name)
        pred = model.forward(inputs, rng)
        if loss_name == "smape":
            return losses.smape(pred, targets)
        return losses.mse(pred, targets)

    def evaluate(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> MetricReport:
        self.prepare(model, windows)
        pred = map_windows(model.predict, windows.inputs)
        mse, mae = mse_mae(windows.targets, pred)
        metrics = {"mse": mse, "mae": mae}

        q = self.spec.seasonality
        if q is not None:
            # Per-window short-term metrics with the window input as in-sample history
            per_window = [
                smape_mape_mase_owa(truth, guess, history, q)
                for truth, guess, history in zip(windows.targets, pred, windows.inputs)
            ]
            for key in ("smape", "mape", "mase", "owa"):
                metrics[key] = float(np.mean([row[key] for row in per_window]))

        return MetricReport(
            task=self.name,
            metrics=metrics,
            counts={"windows": len(windows), "points": int(windows.targets.size)},
        )

    def plot_frame(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> pd.DataFrame:
        return truth_pred_frame(windows.targets[0], forecast(windows.inputs[0], self.spec, model))
