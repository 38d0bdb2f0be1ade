import logging
from collections.abc import Callable, Iterable
from dataclasses import replace
from typing import Any

import pandas as pd

from ..config.store import RunConfig
from ..errors import PerimidError
from .pipeline import fit_task, write_frame_csv

logger = logging.getLogger(__name__)


def score_config(config: RunConfig) -> dict[str, Any]:
    """Train on the train split and return one table row of test metrics."""
    fitted = fit_task(config)
    report = fitted.evaluate("test")
    return {
        **report.metrics,
        "final_loss": fitted.training.final_loss if fitted.training else None,
        "parameters": fitted.model.parameter_count(),
    }


def _sweep(
    name: str,
    values: Iterable[int],
    configure: Callable[[int], RunConfig],
    csv_path: str | None,
) -> dict[str, Any]:
    rows = []
    for value in values:
        row: dict[str, Any] = {name: value}
        try:
            row.update(score_config(configure(value)))
        except PerimidError as e:
            # one bad setting (e.g. k too large for L) does not end the sweep
            logger.warning(f"{name}={value} failed: {e}")
            row["error"] = str(e)
        rows.append(row)
    if not rows:
        return {"success": False, "error": f"no {name} values to sweep"}
    frame = pd.DataFrame(rows)
    if csv_path:
        write_frame_csv(csv_path, frame)
    result: dict[str, Any] = {
        "success": any("error" not in row for row in rows),
        "parameter": name,
        "rows": frame.astype(object).where(frame.notna(), None).to_dict(orient="records"),
        "csv": csv_path,
    }
    if not result["success"]:
        result["error"] = f"every {name} setting failed"
    return result


def sweep_k(
    config: RunConfig, k_min: int, k_max: int, csv_path: str | None = None
) -> dict[str, Any]:
    """
    Sensitivity of the test metrics to the pyramid depth k.

    Returns:
        Dict with one row per k (metrics, final training loss, parameter count)
    """
    if not 2 <= k_min <= k_max:
        return {"success": False, "error": f"need 2 <= k_min <= k_max, got {k_min}..{k_max}"}

    def configure(k: int) -> RunConfig:
        return replace(config, model=replace(config.model, k=k))

    return _sweep("k", range(k_min, k_max + 1), configure, csv_path)


def sweep_lookback(
    config: RunConfig, lengths: Iterable[int], csv_path: str | None = None
) -> dict[str, Any]:
    """
    Sensitivity of the test metrics to the input length L.

    Returns:
        Dict with one row per L
    """
    lengths = sorted(set(lengths))
    if not lengths or lengths[0] < 4:
        return {"success": False, "error": f"look-back lengths must be >= 4, got {lengths}"}

    def configure(length: int) -> RunConfig:
        return replace(
            config,
            task=replace(config.task, input_len=length),
            data=replace(config.data, input_len=length),
        )

    return _sweep("input_len", lengths, configure, csv_path)
