import logging
from typing import Any

from ..config.store import RunConfig
from ..errors import PerimidError
from .pipeline import fit_task, write_frame_csv

logger = logging.getLogger(__name__)


def train_model(config: RunConfig) -> dict[str, Any]:
    """
    Train a model for ``config.task`` and score it on the validation split.

    Args:
        config: Full run configuration; output.checkpoint and output.loss_curve
            receive the trained weights and the (step, loss) curve.

    Returns:
        Dict with training summary and validation metrics
    """
    try:
        fitted = fit_task(config)
        result = {"success": True, **fitted.summary()}
        if "val" in fitted.parts and len(fitted.parts["val"]):
            result["metrics"] = fitted.evaluate("val").metrics
        result["loss_curve"] = config.output.loss_curve
    except PerimidError as e:
        return {"success": False, "error": str(e)}
    return result


def run_task(config: RunConfig) -> dict[str, Any]:
    """
    Evaluate ``config.task`` on the test split.

    An existing output.checkpoint is reused; otherwise a model is trained
    first (and saved there if the path is set).

    Returns:
        Dict with the metric report, window counts and the plot CSV path
    """
    try:
        fitted = fit_task(config, reuse_checkpoint=True)
        report = fitted.evaluate("test")
        plot = config.output.plot
        if plot:
            test = fitted.parts["test"]
            frame = fitted.task.plot_frame(fitted.model, test, fitted.parts["train"])
            write_frame_csv(plot, frame)
            logger.info(f"plot columns written to {plot}")
    except PerimidError as e:
        return {"success": False, "error": str(e)}

    return {
        "success": True,
        **fitted.summary(),
        "metrics": report.metrics,
        "counts": report.counts,
        "spec": config.task.to_dict(),
        "plot": plot,
    }
