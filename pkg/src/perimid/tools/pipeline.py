"""Shared steps behind the task tools: data, model, training and reporting."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..config.store import RunConfig, add_run_to_history
from ..data.windowing import WindowSet
from ..errors import ConfigurationError, DataError
from ..metrics import MetricReport
from ..model.network import PyramidTransformer
from ..tasks.base import Task
from ..tasks.registry import get_task
from ..training.checkpoint import load_checkpoint
from ..training.trainer import TrainResult, train

logger = logging.getLogger(__name__)


@dataclass
class FittedTask:
    task: Task
    model: PyramidTransformer
    parts: dict[str, WindowSet]
    training: TrainResult | None = None

    def evaluate(self, split: str = "test") -> MetricReport:
        if split not in self.parts or len(self.parts[split]) == 0:
            raise DataError(f"no {split} windows to evaluate")
        return self.task.evaluate(self.model, self.parts[split], self.parts["train"])

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "task": self.task.name,
            "windows": {name: len(part) for name, part in self.parts.items()},
            "parameters": self.model.parameter_count(),
        }
        if self.training is not None:
            out["steps"] = self.training.steps
            out["final_loss"] = self.training.final_loss
            out["checkpoint"] = str(self.training.checkpoint) if self.training.checkpoint else None
        return out


def _check_loaded(model: PyramidTransformer, task: Task, channels: int) -> None:
    expected = task.model_shape(channels)
    if model.shape != expected:
        raise ConfigurationError(
            f"checkpoint was built for {model.shape}, this run needs {expected}"
        )


def fit_task(config: RunConfig, reuse_checkpoint: bool = False) -> FittedTask:
    """
    Load the datasets for ``config.task`` and train a model on the train split.

    With ``reuse_checkpoint`` and an existing ``config.output.checkpoint``, the
    stored model is loaded instead of training a new one.
    """
    task = get_task(config.task)
    parts = task.datasets(config.data)
    if "train" not in parts or len(parts["train"]) == 0:
        raise DataError("the train split holds no windows")
    channels = parts["train"].channels

    path = config.output.checkpoint
    if reuse_checkpoint and path and Path(path).exists():
        model, _ = load_checkpoint(path)
        _check_loaded(model, task, channels)
        logger.info(f"loaded {task.name} model from {path}")
        return FittedTask(task=task, model=model, parts=parts)

    model = task.build_model(config.model, channels, seed=config.train.seed)
    result = train(
        model,
        parts["train"],
        task,
        config.train,
        checkpoint=path,
        loss_curve_csv=config.output.loss_curve,
    )
    return FittedTask(task=task, model=model, parts=parts, training=result)


def write_frame_csv(path: str | Path, frame: Any) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return str(path)


def finish(command: str, result: dict[str, Any], out: str | None) -> dict[str, Any]:
    """Write ``result`` as the JSON report and record successful runs in the history."""
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(result, indent=2, default=str))
        logger.info(f"report written to {path}")
    if result.get("success"):
        add_run_to_history(
            {
                "command": command,
                "task": result.get("task"),
                "out": out,
                "metrics": result.get("metrics", {}),
            }
        )
    return result
