import logging
from typing import Any

import numpy as np
import pandas as pd

from .. import spectral
from ..config.store import RunConfig
from ..errors import DataError, PerimidError
from ..model.flows import enumerate_flows
from ..model.network import attention_maps
from ..pyramid import PeriodicPyramid
from ..pyramid import build_pyramid as assemble_pyramid
from ..training.checkpoint import load_checkpoint
from .pipeline import write_frame_csv

logger = logging.getLogger(__name__)


def _window(series: np.ndarray, start: int, length: int) -> np.ndarray:
    end = start + length
    if start < 0 or end > len(series):
        raise DataError(f"window [{start}, {end}) lies outside the {len(series)}-point series")
    return series[start:end]


def attention_frame(pyramid: PeriodicPyramid, maps: list[np.ndarray]) -> pd.DataFrame:
    """Long-format attention weights: one row per (layer, channel, head, query, key)."""
    rows = []
    for layer, weights in enumerate(maps, start=1):
        channels, heads, n, _ = weights.shape
        c, h, q, k = np.meshgrid(
            np.arange(channels), np.arange(heads), np.arange(n), np.arange(n), indexing="ij"
        )
        rows.append(
            pd.DataFrame(
                {
                    "layer": layer,
                    "channel": c.reshape(-1),
                    "head": h.reshape(-1),
                    "query": q.reshape(-1),
                    "key": k.reshape(-1),
                    "query_level": np.array([pyramid.table[i].level for i in q.reshape(-1)]),
                    "key_level": np.array([pyramid.table[i].level for i in k.reshape(-1)]),
                    "weight": weights.reshape(-1),
                }
            )
        )
    return pd.concat(rows, ignore_index=True)


def mask_frame(pyramid: PeriodicPyramid) -> pd.DataFrame:
    """The attention mask as 0/1, one row per query token and one column per key token."""
    return pd.DataFrame(pyramid.mask.astype(int))


def build_pyramid(
    config: RunConfig,
    start: int = 0,
    checkpoint: str | None = None,
    attention_csv: str | None = None,
    mask_csv: str | None = None,
) -> dict[str, Any]:
    """
    Build the periodic pyramid of one input window.

    Args:
        config: Supplies the data source, input_len, k, kernel and max_flows.
        start: First index of the window.
        checkpoint: Trained model; its periods and attention weights are used.
        attention_csv: Where to write attention weights (needs ``checkpoint``).
        mask_csv: Where to write the 0/1 attention mask, one row per token.

    Returns:
        Dict with the pyramid (components, inclusion pairs, mask) and its feature flows
    """
    try:
        series = config.data.load()
        if checkpoint is None:
            if attention_csv is not None:
                raise DataError("attention maps need a trained model (--checkpoint)")
            window = _window(series, start, config.task.input_len)
            periods = spectral.detect_periods(window, config.model.k, config.model.kernel)
            pyramid = assemble_pyramid(len(window), periods)
            max_flows = config.model.max_flows
        else:
            model, _ = load_checkpoint(checkpoint)
            window = _window(series, start, model.shape.input_len)
            pyramid, maps = attention_maps(model, window)
            max_flows = model.config.max_flows
            if attention_csv is not None:
                write_frame_csv(attention_csv, attention_frame(pyramid, maps))
                logger.info(f"attention weights of {len(maps)} layers written to {attention_csv}")
        if mask_csv is not None:
            write_frame_csv(mask_csv, mask_frame(pyramid))
        flows = enumerate_flows(pyramid.relation, pyramid.table, max_flows)
    except PerimidError as e:
        return {"success": False, "error": str(e)}

    return {
        "success": True,
        "start": start,
        "n_tokens": pyramid.n_tokens,
        "pyramid": pyramid.to_dict(),
        "flow_count": len(flows),
        "flows": [flow.to_dict() for flow in flows],
        "attention_csv": attention_csv,
        "mask_csv": mask_csv,
    }
