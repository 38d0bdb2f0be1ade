"""Missing-value imputation by reconstruction with pre-interpolated inputs."""

import numpy as np
import pandas as pd

from ..data.manifest import DatasetManifest
from ..data.windowing import WindowSet, gen_mask, split_reconstruction
from ..errors import ShapeError
from ..metrics import MetricReport, mse_mae
from ..model.network import PyramidTransformer
from ..numerics.tensor import Tensor
from ..preprocessing import pre_interpolate
from ..training import losses
from .base import Task, TaskSpec, map_windows, truth_pred_frame

# seed of the evaluation masks
EVAL_MASK_SEED = 2024


def model_input(x: np.ndarray, mask: np.ndarray, pre_interpolation: bool = True) -> np.ndarray:
    """What the model sees: gaps pre-interpolated, or zero-filled when that is disabled."""
    if pre_interpolation:
        return pre_interpolate(x, mask)
    return np.where(mask, 0.0, x)


def impute(
    x_masked: np.ndarray, mask: np.ndarray, spec: TaskSpec, model: PyramidTransformer
) -> np.ndarray:
    """
    Fill the masked points of one L x C window.

    Observed entries are returned unchanged; only masked entries take the
    model's reconstruction.
    """
    x = np.asarray(x_masked, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if x.ndim != 2 or x.shape[0] != spec.input_len:
        raise ShapeError(f"impute expects an ({spec.input_len}, C) window, got {x.shape}")
    if mask.shape != x.shape:
        raise ShapeError(f"mask {mask.shape} does not match window {x.shape}")
    if not mask.any():
        return x.copy()
    filled = model_input(x, mask, spec.pre_interpolation)
    recon = model.predict(filled[None])[0]
    return np.where(mask, recon, x)


class ImputeTask(Task):
    @property
    def name(self) -> str:
        return "impute"

    @property
    def default_loss(self) -> str:
        return "mse"

    def datasets(self, manifest: DatasetManifest) -> dict[str, WindowSet]:
        return split_reconstruction(
            manifest.load(), self.spec.input_len, manifest.stride, manifest.fractions
        )

    def masked_batch(
        self, inputs: np.ndarray, rng: np.random.Generator | int
    ) -> tuple[np.ndarray, np.ndarray]:
        mask = gen_mask(inputs.shape, self.spec.mask_ratio, rng)
        return model_input(inputs, mask, self.spec.pre_interpolation), mask

    def loss(self, model, inputs, targets, rng, loss_name) -> Tensor:
        self.resolve_loss(loss_name)
        # Only the hidden positions are supervised
        fed, mask = self.masked_batch(inputs, rng if rng is not None else 0)
        return losses.mse(model.forward(fed, rng), targets, weight=mask)

    def evaluate(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> MetricReport:
        self.prepare(model, windows)
        mask = gen_mask(windows.inputs.shape, self.spec.mask_ratio, EVAL_MASK_SEED)
        fed = model_input(windows.inputs, mask, self.spec.pre_interpolation)
        recon = map_windows(model.predict, fed)
        completed = np.where(mask, recon, windows.inputs)

        mse, mae = mse_mae(windows.targets[mask], completed[mask])
        base_mse, base_mae = mse_mae(
            windows.targets[mask], pre_interpolate(windows.inputs, mask)[mask]
        )
        return MetricReport(
            task=self.name,
            metrics={
                "mse": mse,
                "mae": mae,
                "baseline_mse": base_mse,
                "baseline_mae": base_mae,
            },
            counts={"windows": len(windows), "masked_points": int(mask.sum())},
        )

    def plot_frame(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> pd.DataFrame:
        truth = windows.inputs[0]
        mask = gen_mask(truth.shape, self.spec.mask_ratio, EVAL_MASK_SEED)
        frame = truth_pred_frame(truth, impute(np.where(mask, 0.0, truth), mask, self.spec, model))
        for c in range(mask.shape[1]):
            frame[f"missing_{c}"] = mask[:, c].astype(int)
        return frame
