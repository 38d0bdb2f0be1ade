"""Mini-batch training loop shared by every task."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..data.windowing import WindowSet
from ..errors import NumericsError, TrainingError
from ..model.network import PyramidTransformer
from ..numerics.tensor import GradTape
from ..tasks.base import Task
from .checkpoint import save_checkpoint
from .config import TrainConfig
from .optimizer import Adam

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: PyramidTransformer
    loss_curve: list[tuple[int, float]] = field(default_factory=list)
    steps: int = 0
    checkpoint: Path | None = None

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1][1] if self.loss_curve else float("nan")

    def curve_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.loss_curve, columns=["step", "loss"])


def write_loss_curve(path: str | Path, curve: list[tuple[int, float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(curve, columns=["step", "loss"]).to_csv(path, index=False, float_format="%.17g")
    return path


def train(
    model: PyramidTransformer,
    dataset: WindowSet,
    task: Task,
    config: TrainConfig,
    checkpoint: str | Path | None = None,
    loss_curve_csv: str | Path | None = None,
) -> TrainResult:
    """
    Fit ``model`` in place on ``dataset`` with Adam.

    One generator seeded from ``config.seed`` drives shuffling, dropout and
    imputation masks, so a run is reproducible given the seed and data.

    Args:
        model: Model built for ``task``.
        dataset: Training windows; targets follow the task's convention.
        task: Supplies the differentiable loss.
        config: Optimizer and loop settings.
        checkpoint: Written at the end, or with the last good weights on failure.
        loss_curve_csv: Optional (step, loss) CSV.

    Raises:
        TrainingError: Empty dataset, or a non-finite loss or gradient.
        ConfigurationError: The task cannot train with the configured loss.
    """
    if len(dataset) == 0:
        raise TrainingError("cannot train on an empty dataset")
    loss_name = task.resolve_loss(config.loss)
    rng = np.random.default_rng(config.seed)
    task.prepare(model, dataset)

    params = model.named_parameters()
    names = list(params)
    optimizer = Adam(params, config)
    result = TrainResult(model=model)
    extra = {"train": config.to_dict(), "task": task.spec.to_dict()}
    logger.info(
        f"training {task.name} model ({model.parameter_count()} parameters) on "
        f"{len(dataset)} windows, loss={loss_name}"
    )

    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(dataset))
            epoch_losses = []
            for start in range(0, len(order), config.batch_size):
                batch = order[start : start + config.batch_size]
                with GradTape() as tape:
                    loss = task.loss(
                        model, dataset.inputs[batch], dataset.targets[batch], rng, loss_name
                    )
                value = loss.item()
                grads = tape.gradient(loss, [params[name] for name in names])
                norm = optimizer.step(dict(zip(names, grads)))

                result.steps += 1
                result.loss_curve.append((result.steps, value))
                epoch_losses.append(value)
                logger.debug(f"step {result.steps}: loss {value:.6g}, grad norm {norm:.3g}")
                if config.max_steps is not None and result.steps >= config.max_steps:
                    break
            logger.info(f"epoch {epoch}: mean loss {np.mean(epoch_losses):.6g}")
            if config.max_steps is not None and result.steps >= config.max_steps:
                break
    except (NumericsError, TrainingError) as e:
        if checkpoint is not None:
            extra["aborted_at_step"] = result.steps + 1
            result.checkpoint = save_checkpoint(checkpoint, model, extra)
        if loss_curve_csv is not None:
            write_loss_curve(loss_curve_csv, result.loss_curve)
        raise TrainingError(f"training diverged at step {result.steps + 1}: {e}") from e

    if checkpoint is not None:
        extra["steps"] = result.steps
        result.checkpoint = save_checkpoint(checkpoint, model, extra)
    if loss_curve_csv is not None:
        write_loss_curve(loss_curve_csv, result.loss_curve)
    return result
