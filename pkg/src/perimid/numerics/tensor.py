"""Dense float64 tensors and the reverse-mode gradient tape."""

from __future__ import annotations

import contextvars
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import NumericsError, ShapeError


DTYPE = np.float64

Backward = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

# One active tape per thread/context; tapes are never shared between backward passes.
_ACTIVE_TAPE: contextvars.ContextVar[GradTape | None] = contextvars.ContextVar(
    "perimid_active_tape", default=None
)


def check_finite(values: np.ndarray, op: str) -> None:
    """Raise NumericsError if an op produced NaN or Inf."""
    if not np.isfinite(values).all():
        raise NumericsError(f"{op} produced non-finite values")


class Tensor:
    """
    Immutable row-major float64 array that may take part in differentiation.

    Parameters are the only tensors whose values change after creation, and
    only through ``assign`` (optimizer steps, checkpoint loading, gradient
    checking).
    """

    __slots__ = ("_data", "requires_grad", "name")

    def __init__(self, data: Any, requires_grad: bool = False, name: str | None = None) -> None:
        values = np.array(data, dtype=DTYPE)
        check_finite(values, "tensor construction")
        values.flags.writeable = False
        self._data = values
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, values: np.ndarray, requires_grad: bool) -> Tensor:
        tensor = cls.__new__(cls)
        values = np.ascontiguousarray(values, dtype=DTYPE)
        values.flags.writeable = False
        tensor._data = values
        tensor.requires_grad = requires_grad
        tensor.name = None
        return tensor

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the values."""
        return self._data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self._data.reshape(-1)[0])

    def assign(self, values: Any) -> None:
        """Replace the values of a parameter in place (shape must not change)."""
        new = np.array(values, dtype=DTYPE)
        if new.shape != self.shape:
            raise ShapeError(f"cannot assign shape {new.shape} to tensor of shape {self.shape}")
        check_finite(new, f"assign to {self.name or 'tensor'}")
        new.flags.writeable = False
        self._data = new

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: Any) -> Tensor:
        from .ops import add

        return add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        from .ops import add

        return add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        from .ops import sub

        return sub(self, other)

    def __neg__(self) -> Tensor:
        from .ops import scale

        return scale(self, -1.0)

    def __mul__(self, other: Any) -> Tensor:
        from .ops import mul, scale

        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        return self.__mul__(other)

    def __matmul__(self, other: Any) -> Tensor:
        from .ops import matmul

        return matmul(self, other)


def as_tensor(value: Any) -> Tensor:
    """Wrap constants; tensors pass through untouched."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclass
class TapeEntry:
    """One recorded differentiable operation."""

    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: Backward


class GradTape:
    """
    Ordered record of differentiable operations.

    Usage::

        with GradTape() as tape:
            loss = model_loss(...)
        grads = tape.gradient(loss, params)
    """

    def __init__(self) -> None:
        self._entries: list[TapeEntry] = []
        self._token: contextvars.Token | None = None

    def __enter__(self) -> GradTape:
        if self._token is not None:
            raise NumericsError("a GradTape cannot be entered twice")
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def ops(self) -> list[str]:
        return [entry.op for entry in self._entries]

    def record(self, entry: TapeEntry) -> None:
        self._entries.append(entry)

    def gradient(self, target: Tensor, sources: Sequence[Tensor]) -> list[np.ndarray]:
        """
        Replay the tape in reverse and return d(target)/d(source) for each source.

        Sources that the target does not depend on receive zero gradients.
        """
        if target.size != 1:
            raise NumericsError(f"gradient target must be scalar, got shape {target.shape}")

        grads: dict[int, np.ndarray] = {id(target): np.ones(target.shape, dtype=DTYPE)}
        for entry in reversed(self._entries):
            upstream = grads.get(id(entry.output))
            if upstream is None:
                continue
            for tensor, grad in zip(entry.inputs, entry.backward(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                grads[key] = grads[key] + grad if key in grads else grad

        result = []
        for source in sources:
            grad = grads.get(id(source))
            result.append(np.zeros(source.shape, dtype=DTYPE) if grad is None else grad)
        return result


def active_tape() -> GradTape | None:
    return _ACTIVE_TAPE.get()


def make_result(
    op: str, values: np.ndarray, inputs: Sequence[Tensor], backward: Backward
) -> Tensor:
    """Wrap an op's output and record it on the active tape when gradients are needed."""
    check_finite(values, op)
    needs_grad = any(tensor.requires_grad for tensor in inputs)
    out = Tensor._wrap(values, requires_grad=needs_grad)
    tape = _ACTIVE_TAPE.get()
    if needs_grad and tape is not None:
        tape.record(TapeEntry(op=op, output=out, inputs=tuple(inputs), backward=backward))
    return out
