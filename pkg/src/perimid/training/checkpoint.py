"""
Binary checkpoints.

Layout: the magic bytes ``PMF1``, a little-endian uint32 header length, a UTF-8
JSON header (format version, model config, model shape, frozen periods and the
name and shape of every parameter block), then each block as little-endian
float64 values in declaration order.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import TrainingError
from ..model.network import ModelConfig, ModelShape, PyramidTransformer
from ..spectral import PeriodSet

logger = logging.getLogger(__name__)

MAGIC = b"PMF1"
VERSION = 1
_LENGTH = struct.Struct("<I")


def encode_checkpoint(model: PyramidTransformer, extra: dict[str, Any] | None = None) -> bytes:
    params = model.named_parameters()
    header = {
        "version": VERSION,
        "config": model.config.to_dict(),
        "shape": asdict(model.shape),
        "periods": model.frozen_periods.to_dict() if model.frozen_periods else None,
        "blocks": [{"name": name, "shape": list(t.shape)} for name, t in params.items()],
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.asarray(t.data, dtype="<f8").tobytes() for t in params.values())
    return MAGIC + _LENGTH.pack(len(head)) + head + body


def decode_checkpoint(blob: bytes) -> tuple[PyramidTransformer, dict[str, Any]]:
    """Rebuild a model from checkpoint bytes; returns the model and the header."""
    if blob[:4] != MAGIC:
        raise TrainingError("not a perimid checkpoint (bad magic)")
    offset = len(MAGIC) + _LENGTH.size
    if len(blob) < offset:
        raise TrainingError("checkpoint is truncated")
    (size,) = _LENGTH.unpack_from(blob, len(MAGIC))
    try:
        header = json.loads(blob[offset : offset + size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise TrainingError(f"corrupt checkpoint header: {e}") from e
    if header.get("version") != VERSION:
        raise TrainingError(f"unsupported checkpoint version {header.get('version')}")

    model = PyramidTransformer(ModelConfig(**header["config"]), ModelShape(**header["shape"]))
    if header["periods"] is not None:
        model.freeze(PeriodSet.from_dict(header["periods"]))

    params = model.named_parameters()
    offset += size
    for block in header["blocks"]:
        name, shape = block["name"], tuple(block["shape"])
        if name not in params or params[name].shape != shape:
            raise TrainingError(f"checkpoint block {name} {shape} does not fit the model")
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(blob):
            raise TrainingError("checkpoint is truncated")
        params[name].assign(np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape))
        offset = end
    if offset != len(blob):
        raise TrainingError("checkpoint has trailing bytes")
    return model, header


def save_checkpoint(
    path: str | Path, model: PyramidTransformer, extra: dict[str, Any] | None = None
) -> Path:
    """Write via a temporary file and rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(model, extra))
    os.replace(tmp, path)
    logger.info(f"checkpoint written to {path}")
    return path


def load_checkpoint(path: str | Path) -> tuple[PyramidTransformer, dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise TrainingError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())
