import logging
from dataclasses import replace
from typing import Any

import pandas as pd

from ..config.store import RunConfig
from ..errors import PerimidError
from .pipeline import write_frame_csv
from .sweep import score_config

logger = logging.getLogger(__name__)

# Each variant removes one ingredient from the full model
VARIANTS: dict[str, dict[str, Any]] = {
    "perimid": {},
    "full_attention": {"attention": "full"},
    "flatten_heads": {"aggregation": "flatten"},
    "patch_partition": {"partition": "patch"},
}


def list_variants() -> list[str]:
    return list(VARIANTS.keys())


def ablate(
    config: RunConfig,
    variants: list[str] | None = None,
    seeds: list[int] | None = None,
    csv_path: str | None = None,
) -> dict[str, Any]:
    """
    Train every variant on the same data and seeds and compare test metrics.

    Args:
        config: Base configuration; each variant overrides model switches only.
        variants: Variant names (defaults to all).
        seeds: Training seeds; the table has one row per (variant, seed).
        csv_path: Optional CSV for the per-row table.

    Returns:
        Dict with per-row results and the per-variant median of every metric
    """
    names = variants or list_variants()
    unknown = [name for name in names if name not in VARIANTS]
    if unknown:
        return {
            "success": False,
            "error": f"Unknown variant: {', '.join(unknown)}. Available: {', '.join(VARIANTS)}",
        }
    seeds = seeds or [config.train.seed]

    rows = []
    try:
        for name in names:
            model = replace(config.model, **VARIANTS[name])
            for seed in seeds:
                run = replace(config, model=model, train=replace(config.train, seed=seed))
                logger.info(f"ablation variant {name}, seed {seed}")
                rows.append({"variant": name, "seed": seed, **score_config(run)})
    except PerimidError as e:
        return {"success": False, "error": str(e), "rows": rows}

    frame = pd.DataFrame(rows)
    if csv_path:
        write_frame_csv(csv_path, frame)
    medians = frame.drop(columns="seed").groupby("variant", sort=False).median()
    return {
        "success": True,
        "task": config.task.kind,
        "seeds": seeds,
        "rows": rows,
        "median": medians.to_dict(orient="index"),
        "csv": csv_path,
    }
