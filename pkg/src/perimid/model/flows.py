"""Periodic feature flows: root-to-leaf paths through the pyramid and their aggregation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, PyramidError
from ..numerics import ops
from ..numerics.tensor import Tensor
from ..pyramid import ComponentIndex, InclusionRelation
from .layers import Layer, Linear

logger = logging.getLogger(__name__)

DEFAULT_MAX_FLOWS = 4096


@dataclass(frozen=True)
class FeatureFlow:
    """One component per level, consecutive pairs related by R = 1."""

    path: tuple[ComponentIndex, ...]
    positions: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"positions": list(self.positions), "path": [c.to_dict() for c in self.path]}


def count_flows(relation: InclusionRelation, table: tuple[ComponentIndex, ...]) -> int:
    """Number of root-to-leaf paths, without enumerating them."""
    depth = max(c.level for c in table)
    paths = {pos: 1 for pos, c in enumerate(table) if c.level == 1}
    for level in range(2, depth + 1):
        paths = {
            pos: sum(paths.get(parent, 0) for parent in relation.parents(pos))
            for pos, c in enumerate(table)
            if c.level == level
        }
    return sum(paths.values())


def enumerate_flows(
    relation: InclusionRelation,
    table: tuple[ComponentIndex, ...],
    max_flows: int = DEFAULT_MAX_FLOWS,
) -> list[FeatureFlow]:
    """
    All root-to-leaf paths, ordered lexicographically by slot per level.

    Raises:
        ConfigurationError: the pyramid has more than ``max_flows`` flows.
    """
    total = count_flows(relation, table)
    if total > max_flows:
        raise ConfigurationError(
            f"pyramid has {total} feature flows (max_flows={max_flows}); lower k"
        )
    if total > max_flows // 2:
        logger.warning(f"{total} feature flows is close to max_flows={max_flows}")

    depth = max(c.level for c in table)
    flows: list[FeatureFlow] = []

    def walk(prefix: list[int]) -> None:
        if len(prefix) == depth:
            flows.append(
                FeatureFlow(path=tuple(table[p] for p in prefix), positions=tuple(prefix))
            )
            return
        for child in relation.children(prefix[-1]):
            walk(prefix + [child])

    for root, comp in enumerate(table):
        if comp.level == 1:
            walk([root])
    return flows


class FlowHead(Layer):
    """Shared projection of a concatenated flow (k * d_model) to the target length."""

    def __init__(self, k: int, d_model: int, target_len: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.k = k
        self.projection = self.add_child("projection", Linear(k * d_model, target_len, rng))


def aggregate_flows(
    encoded: Tensor, flows: list[FeatureFlow], target_len: int, params: FlowHead
) -> Tensor:
    """
    Project every flow to ``target_len`` and average over flows.

    Args:
        encoded: Encoder output, (N, d_model) or (B, N, d_model).
        flows: Feature flows of the pyramid the tokens came from.
        target_len: Output length T.
        params: Flow projection.

    Returns:
        (T,) or (B, T).
    """
    if not flows:
        raise PyramidError("aggregate_flows needs at least one flow")
    if params.projection.weight.shape[1] != target_len:
        width = params.projection.weight.shape[1]
        raise PyramidError(f"flow head projects to {width}, not {target_len}")

    squeeze = encoded.ndim == 2
    x = ops.reshape(encoded, (1, *encoded.shape)) if squeeze else encoded
    batch, _, width = x.shape
    index = np.array([flow.positions for flow in flows], dtype=np.intp)
    n_flows, depth = index.shape

    gathered = ops.take(x, index.reshape(-1), axis=1)
    stacked = ops.reshape(gathered, (batch, n_flows, depth * width))
    projected = params.projection(stacked)
    pooled = ops.mean(projected, axis=1)
    return ops.reshape(pooled, (target_len,)) if squeeze else pooled
