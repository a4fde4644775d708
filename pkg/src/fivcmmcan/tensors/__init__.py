"""
Dense float64 tensors with reverse-mode differentiation.

Every equation of the fusion model is composed from the primitives exported
here. ``grad_check`` compares the tape's analytic gradients against central
finite differences.

Example:
    >>> from fivcmmcan.tensors import Tensor, sigmoid, sum_all, grad_check
    >>> x = Tensor([0.5, -1.0, 2.0], requires_grad=True)
    >>> grad_check(lambda t: sum_all(sigmoid(t)), x) < 1e-6
    True
"""

__all__ = [
    "Tensor",
    "Tape",
    "TapeRecord",
    "Module",
    "DimensionError",
    "GradientError",
    "backward",
    "no_grad",
    "is_grad_enabled",
    "init_weight",
    "init_constant",
    "zero_grads",
    "grad_check",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "concat",
    "reshape",
    "transpose",
    "relu",
    "sigmoid",
    "tanh",
    "softmax_rows",
    "layer_norm_rows",
    "mean_rows",
    "sum_rows",
    "sum_all",
    "mean_all",
    "log",
    "take_rows",
    "dropout",
]

from typing import Callable

import numpy as np

from fivcmmcan.tensors.types import (
    Tensor,
    Tape,
    TapeRecord,
    Module,
    DimensionError,
    GradientError,
    backward,
    no_grad,
    is_grad_enabled,
    init_weight,
    init_constant,
    zero_grads,
)
from fivcmmcan.tensors.types.functions import (
    add,
    sub,
    mul,
    scale,
    matmul,
    concat,
    reshape,
    transpose,
    relu,
    sigmoid,
    tanh,
    softmax_rows,
    layer_norm_rows,
    mean_rows,
    sum_rows,
    sum_all,
    mean_all,
    log,
    take_rows,
    dropout,
)


def grad_check(
    f: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-5
) -> float:
    """
    Compare analytic and central-difference gradients of ``f`` at ``x``.

    ``f`` maps ``x`` to a scalar tensor and must be deterministic (eval mode
    or frozen dropout masks). It may ignore its argument and close over ``x``
    instead, which is how parameter groups of a whole model are checked.
    ``x.grad`` is restored afterwards; other leaves reached by ``f`` keep the
    gradient accumulated by the analytic pass.

    Returns:
        max over coordinates of |analytic - numeric| / max(1, |analytic|)
    """
    if not x.requires_grad:
        raise GradientError("grad_check needs a tensor with requires_grad=True")

    saved = x.grad
    x.grad = None
    backward(f(x))
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
    x.grad = saved

    numeric = np.zeros_like(x.data)
    with no_grad():
        for idx in np.ndindex(*x.shape):
            original = x.data[idx]
            x.data[idx] = original + step
            upper = f(x).item()
            x.data[idx] = original - step
            lower = f(x).item()
            x.data[idx] = original
            numeric[idx] = (upper - lower) / (2.0 * step)

    if not analytic.size:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))
