"""
Tensor and tape data structures.

This module defines the core of the differentiation engine:
    - Tensor: dense float64 array with an optional gradient buffer
    - TapeRecord: one executed primitive with its inputs, output and local
      backward rule
    - Tape: topologically ordered records leading to an output, replayed in
      reverse by ``backward``
    - no_grad / is_grad_enabled: context switch that stops recording

Every tensor produced by a primitive while recording is enabled, and with at
least one input requiring gradients, holds a reference to the record that
produced it. Leaves (parameters, inputs) have no record.
"""

import contextlib
import contextvars
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "fivcmmcan_grad_enabled", default=True
)


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class GradientError(RuntimeError):
    """Raised when backward is requested on an unusable graph."""


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block (inference, finite differences)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Tensor(object):
    """
    Dense multi-dimensional array of 64-bit reals on the differentiation tape.

    Attributes:
        data: Row-major float64 values
        requires_grad: Whether gradients flow into (or through) this tensor
        grad: Gradient buffer, same shape as ``data``; populated for leaves
            by ``backward``
        name: Optional label used in diagnostics
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_record")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._record: Optional["TapeRecord"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data.reshape(-1)

    @property
    def is_leaf(self) -> bool:
        return self._record is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Same values, cut from the tape."""
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        backward(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from fivcmmcan.tensors.types.functions import matmul

        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        from fivcmmcan.tensors.types.functions import add

        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from fivcmmcan.tensors.types.functions import sub

        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from fivcmmcan.tensors.types.functions import mul

        return mul(self, other)

    def __neg__(self) -> "Tensor":
        from fivcmmcan.tensors.types.functions import scale

        return scale(self, -1.0)

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


class TapeRecord(object):
    """One executed primitive: ``output = op(*inputs)`` plus its local backward."""

    __slots__ = ("op", "inputs", "output", "backward_fn", "consumed")

    def __init__(
        self,
        op: str,
        inputs: Sequence[Tensor],
        output: Tensor,
        backward_fn: BackwardFn,
    ):
        self.op = op
        self.inputs = tuple(inputs)
        self.output = output
        self.backward_fn = backward_fn
        self.consumed = False

    def __repr__(self):
        return f"TapeRecord({self.op}, inputs={len(self.inputs)})"


class Tape(object):
    """Ordered record of the primitives an output depends on.

    Records are kept in topological order: every record appears after the
    records producing its inputs.
    """

    def __init__(self, records: List[TapeRecord]):
        self.records = records

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @classmethod
    def trace(cls, output: Tensor) -> "Tape":
        """Collect the records reachable from ``output`` in topological order."""
        if output._record is None:
            return cls([])

        order: List[TapeRecord] = []
        seen = set()
        stack: List[Tuple[TapeRecord, bool]] = [(output._record, False)]
        while stack:
            record, expanded = stack.pop()
            if expanded:
                order.append(record)
                continue
            if id(record) in seen:
                continue
            seen.add(id(record))
            stack.append((record, True))
            for t in record.inputs:
                if t._record is not None and id(t._record) not in seen:
                    stack.append((t._record, False))

        return cls(order)


def make_result(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap a primitive's forward value, recording it when gradients are needed."""
    requires = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires)
    if requires:
        out._record = TapeRecord(op, inputs, out, backward_fn)
    return out


def backward(loss: Tensor) -> None:
    """
    Reverse-mode sweep from a scalar ``loss``.

    Every leaf with ``requires_grad`` reachable from ``loss`` receives
    dLoss/dLeaf, added into its (zero-initialized if absent) ``grad`` buffer.
    A tape can be swept once; a second call without a fresh forward pass
    raises ``GradientError``.

    Raises:
        GradientError: loss is not a single value, is detached, or its tape
            was already consumed.
    """
    if loss.data.size != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GradientError("backward called on a tensor detached from the tape")

    if loss._record is None:
        if loss.grad is None:
            loss.grad = np.zeros_like(loss.data)
        loss.grad += 1.0
        return

    if loss._record.consumed:
        raise GradientError(
            "backward already ran through this tape; run a new forward pass"
        )

    tape = Tape.trace(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for record in reversed(tape.records):
        record.consumed = True
        g = grads.pop(id(record.output), None)
        if g is None:
            continue
        for t, tg in zip(record.inputs, record.backward_fn(g)):
            if tg is None or not t.requires_grad:
                continue
            if t._record is None:
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += tg
            elif id(t) in grads:
                grads[id(t)] = grads[id(t)] + tg
            else:
                grads[id(t)] = tg
