"""
Differentiable primitives.

Every primitive takes and returns ``Tensor`` objects, computes its forward
value with numpy and registers a local backward rule on the tape. Arrays may
carry leading batch axes; "rows" always refers to the last axis.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from fivcmmcan.tensors.types.base import DimensionError, Tensor, make_result

LOG_FLOOR = 1e-12


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes numpy broadcasting added to reach it."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes (leading axes broadcast)."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError(
            f"matmul needs matrices, got shapes {a.shape} and {b.shape}"
        )
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul inner extents disagree: {a.shape} x {b.shape}"
        )
    a_data, b_data = a.data, b.data

    def _backward(g):
        ga = unbroadcast(g @ np.swapaxes(b_data, -1, -2), a_data.shape)
        gb = unbroadcast(np.swapaxes(a_data, -1, -2) @ g, b_data.shape)
        return ga, gb

    return make_result("matmul", np.matmul(a_data, b_data), (a, b), _backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape

    def _backward(g):
        return unbroadcast(g, sa), unbroadcast(g, sb)

    return make_result("add", a.data + b.data, (a, b), _backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape

    def _backward(g):
        return unbroadcast(g, sa), unbroadcast(-g, sb)

    return make_result("sub", a.data - b.data, (a, b), _backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; a trailing extent of 1 broadcasts per row."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    a_data, b_data = a.data, b.data

    def _backward(g):
        return (
            unbroadcast(g * b_data, a_data.shape),
            unbroadcast(g * a_data, b_data.shape),
        )

    return make_result("mul", a_data * b_data, (a, b), _backward)


def scale(x: Tensor, factor: float) -> Tensor:
    def _backward(g):
        return (g * factor,)

    return make_result("scale", x.data * factor, (x,), _backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along ``axis`` (the last one by default)."""
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise DimensionError(f"concat: incompatible shapes {shapes}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result("concat", data, tuple(tensors), _backward)


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    source = x.shape

    def _backward(g):
        return (g.reshape(source),)

    return make_result("reshape", x.data.reshape(shape), (x,), _backward)


def transpose(x: Tensor) -> Tensor:
    """Swap the last two axes."""

    def _backward(g):
        return (np.swapaxes(g, -1, -2),)

    return make_result("transpose", np.swapaxes(x.data, -1, -2), (x,), _backward)


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0

    def _backward(g):
        return (g * positive,)

    return make_result("relu", np.where(positive, x.data, 0.0), (x,), _backward)


def sigmoid(x: Tensor) -> Tensor:
    # tanh form stays finite for any input
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def _backward(g):
        return (g * y * (1.0 - y),)

    return make_result("sigmoid", y, (x,), _backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def _backward(g):
        return (g * (1.0 - y * y),)

    return make_result("tanh", y, (x,), _backward)


def softmax_rows(x: Tensor) -> Tensor:
    """Row softmax, stabilized by subtracting the row maximum."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def _backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_result("softmax_rows", y, (x,), _backward)


def layer_norm_rows(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5
) -> Tensor:
    """Normalize each row to zero mean and unit variance, then scale and shift."""
    c = x.shape[-1]
    if c < 2:
        raise DimensionError(f"layer_norm_rows needs rows of length >= 2, got {x.shape}")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(
            f"layer_norm_rows: gamma {gamma.shape} / beta {beta.shape} "
            f"do not match rows of {x.shape}"
        )
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    gamma_data = gamma.data

    def _backward(g):
        dxhat = g * gamma_data
        dx = (inv_std / c) * (
            c * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        dgamma = unbroadcast(g * xhat, gamma_data.shape)
        dbeta = unbroadcast(g, gamma_data.shape)
        return dx, dgamma, dbeta

    return make_result(
        "layer_norm_rows", xhat * gamma_data + beta.data, (x, gamma, beta), _backward
    )


def mean_rows(x: Tensor) -> Tensor:
    """Mean-pool over rows: ``(..., L, c) -> (..., c)``."""
    if x.data.ndim < 2:
        raise DimensionError(f"mean_rows needs a matrix, got shape {x.shape}")
    length = x.shape[-2]

    def _backward(g):
        return (np.repeat(np.expand_dims(g, -2), length, axis=-2) / length,)

    return make_result("mean_rows", x.data.mean(axis=-2), (x,), _backward)


def sum_all(x: Tensor) -> Tensor:
    source = x.shape

    def _backward(g):
        return (np.broadcast_to(g, source).copy(),)

    return make_result("sum", np.asarray(x.data.sum()), (x,), _backward)


def mean_all(x: Tensor) -> Tensor:
    source, count = x.shape, max(x.data.size, 1)

    def _backward(g):
        return (np.broadcast_to(g / count, source).copy(),)

    return make_result("mean", np.asarray(x.data.mean()), (x,), _backward)


def sum_rows(x: Tensor) -> Tensor:
    """Sum over the last axis: ``(..., c) -> (...)``."""
    source = x.shape

    def _backward(g):
        return (np.broadcast_to(np.expand_dims(g, -1), source).copy(),)

    return make_result("sum_rows", x.data.sum(axis=-1), (x,), _backward)


def log(x: Tensor, floor: float = LOG_FLOOR) -> Tensor:
    """Natural log with inputs clamped at ``floor``; no gradient below the clamp."""
    clamped = np.maximum(x.data, floor)
    active = x.data > floor

    def _backward(g):
        return (np.where(active, g / clamped, 0.0),)

    return make_result("log", np.log(clamped), (x,), _backward)


def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` by integer ``ids`` (embedding lookup)."""
    ids = np.asarray(ids, dtype=np.int64)
    rows = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= rows):
        bad = int(ids[(ids < 0) | (ids >= rows)].reshape(-1)[0])
        raise DimensionError(f"take_rows: id {bad} outside table of {rows} rows")
    source = table.shape

    def _backward(g):
        gt = np.zeros(source)
        np.add.at(gt, ids, g)
        return (gt,)

    return make_result("take_rows", table.data[ids], (table,), _backward)


def dropout(
    x: Tensor,
    rate: float,
    train: bool,
    rng: Optional[np.random.Generator] = None,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """
    Inverted dropout.

    In eval mode (or with ``rate == 0``) this is the identity. In train mode
    kept entries are divided by the keep probability. A ``mask`` of kept
    entries may be supplied to freeze the draw.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if mask is None:
        if rng is None:
            raise ValueError("dropout in train mode needs a random generator or a mask")
        mask = rng.random(x.shape) >= rate
    factor = np.asarray(mask, dtype=np.float64) / (1.0 - rate)

    def _backward(g):
        return (g * factor,)

    return make_result("dropout", x.data * factor, (x,), _backward)
