"""Periodic pyramid: component tiling, inclusion relation, attention mask, tokens."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from .errors import PyramidError, ShapeError
from .numerics.tensor import Tensor
from .spectral import PeriodSet

if TYPE_CHECKING:
    from .model.layers import TokenEmbedding

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComponentIndex:
    """The ``slot``-th chunk of pyramid ``level`` (both 1-based), covering [start, end)."""

    level: int
    slot: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start

    def overlaps(self, other: ComponentIndex) -> bool:
        return self.start < other.end and other.start < self.end

    def to_dict(self) -> dict[str, int]:
        return {"level": self.level, "slot": self.slot, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class InclusionRelation:
    """R = 1 pairs between adjacent levels, as (parent position, child position)."""

    edges: frozenset[tuple[int, int]]

    def contains(self, parent: int, child: int) -> bool:
        return (parent, child) in self.edges

    def parents(self, child: int) -> list[int]:
        return sorted(p for p, c in self.edges if c == child)

    def children(self, parent: int) -> list[int]:
        return sorted(c for p, c in self.edges if p == parent)

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class Partition:
    """Component table plus the raw values of each component (canonical order)."""

    table: tuple[ComponentIndex, ...]
    segments: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class PeriodicPyramid:
    """Shape of one pyramid: periods, component table, inclusion relation and mask."""

    length: int
    periods: PeriodSet
    table: tuple[ComponentIndex, ...]
    relation: InclusionRelation
    mask: np.ndarray

    @property
    def n_tokens(self) -> int:
        return len(self.table)

    @property
    def level_sizes(self) -> list[int]:
        levels = [c.level for c in self.table]
        return [levels.count(lvl) for lvl in range(1, self.periods.k + 1)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "length": self.length,
            "periods": self.periods.to_dict(),
            "level_sizes": self.level_sizes,
            "components": [c.to_dict() for c in self.table],
            "inclusion": [list(pair) for pair in self.relation.pairs()],
            "mask": self.mask.astype(int).tolist(),
        }


@dataclass(frozen=True)
class PyramidTokens:
    """Embedded tokens (channels x N x d_model) with their mask and component table."""

    tokens: Tensor
    mask: np.ndarray
    component_table: tuple[ComponentIndex, ...]


def component_table(length: int, periods: PeriodSet) -> tuple[ComponentIndex, ...]:
    """Tile [0, L) at every level with chunks of length p_l; the last chunk may be shorter."""
    periods.validate(length)
    table = []
    for level, period in enumerate(periods.periods, start=1):
        count = math.ceil(length / period)
        for slot in range(count):
            start = slot * period
            table.append(ComponentIndex(level, slot + 1, start, min(start + period, length)))
    return tuple(table)


def partition(x_s: np.ndarray, periods: PeriodSet) -> Partition:
    """
    Cut a seasonal series into periodic components.

    Args:
        x_s: Series of shape (L,) or (L, C); segments keep the trailing channel axis.
        periods: Period set valid for L.
    """
    x = np.asarray(x_s, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ShapeError(f"partition expects (L,) or (L, C), got {x.shape}")
    table = component_table(x.shape[0], periods)
    return Partition(table=table, segments=tuple(x[c.start : c.end] for c in table))


def _level_bounds(table: tuple[ComponentIndex, ...]) -> dict[int, np.ndarray]:
    """Canonical positions of each level's components."""
    levels = np.array([c.level for c in table])
    return {int(lvl): np.flatnonzero(levels == lvl) for lvl in np.unique(levels)}


def inclusion(table: tuple[ComponentIndex, ...]) -> InclusionRelation:
    """R = 1 exactly when an upper-level and next-level component ranges intersect."""
    starts = np.array([c.start for c in table])
    ends = np.array([c.end for c in table])
    by_level = _level_bounds(table)

    edges = set()
    for level in sorted(by_level)[1:]:
        upper, lower = by_level[level - 1], by_level[level]
        overlap = (starts[upper][:, None] < ends[lower][None, :]) & (
            starts[lower][None, :] < ends[upper][:, None]
        )
        for i, j in zip(*np.nonzero(overlap)):
            edges.add((int(upper[i]), int(lower[j])))

    has_parent = {child for _, child in edges}
    orphans = [
        int(pos)
        for level in sorted(by_level)[1:]
        for pos in by_level[level]
        if int(pos) not in has_parent
    ]
    if orphans:
        raise PyramidError(f"components without a parent: {orphans}")
    return InclusionRelation(frozenset(edges))


def build_mask(relation: InclusionRelation, table: tuple[ComponentIndex, ...]) -> np.ndarray:
    """
    Allowed-attention matrix: same level, or adjacent levels with R = 1.

    Components two or more levels apart are never directly connected.
    """
    levels = np.array([c.level for c in table])
    mask = levels[:, None] == levels[None, :]
    for parent, child in relation.edges:
        mask[parent, child] = True
        mask[child, parent] = True
    return mask


def build_pyramid(length: int, periods: PeriodSet) -> PeriodicPyramid:
    table = component_table(length, periods)
    relation = inclusion(table)
    pyramid = PeriodicPyramid(
        length=length,
        periods=periods,
        table=table,
        relation=relation,
        mask=build_mask(relation, table),
    )
    logger.debug(f"pyramid L={length} levels={pyramid.level_sizes} tokens={pyramid.n_tokens}")
    return pyramid


def padded_components(x_s: np.ndarray, table: tuple[ComponentIndex, ...]) -> np.ndarray:
    """Right-zero-pad every component to length L: (L, C) -> (C, N, L)."""
    x = np.asarray(x_s, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    length, channels = x.shape
    out = np.zeros((channels, len(table), length))
    for pos, comp in enumerate(table):
        out[:, pos, : comp.length] = x[comp.start : comp.end].T
    return out


def embed(x_s: np.ndarray, pyramid: PeriodicPyramid, embedding: TokenEmbedding) -> PyramidTokens:
    """Pad, project (shared L -> d_model linear map) and add positional embeddings."""
    components = padded_components(x_s, pyramid.table)
    tokens = embedding(components)
    return PyramidTokens(tokens=tokens, mask=pyramid.mask, component_table=pyramid.table)


def max_token_count(length: int, k: int) -> int:
    """Upper bound on N_total over every valid k-level period set for length L."""
    distinct = sorted({math.ceil(length / f) for f in range(2, math.ceil(length / 2) + 1)})
    counts = [math.ceil(length / p) for p in distinct[: k - 1]]
    if len(counts) < k - 1:
        raise PyramidError(f"L={length} does not admit a {k}-level pyramid")
    return 1 + sum(counts)
