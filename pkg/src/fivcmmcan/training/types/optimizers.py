"""
AdamW with decoupled weight decay.

Per step t, for every parameter theta with gradient g:

    theta <- theta - lr * wd * theta                 (decay, applied first)
    m     <- beta1 * m + (1 - beta1) * g
    v     <- beta2 * v + (1 - beta2) * g^2
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

with m_hat = m / (1 - beta1^t) and v_hat = v / (1 - beta2^t). With
``weight_decay == 0`` this is plain Adam.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fivcmmcan.tensors import Tensor
from fivcmmcan.training.types.base import TrainingError

logger = logging.getLogger(__name__)


class AdamWState(object):
    """Moment buffers, step counter and hyperparameters of an AdamW run."""

    __slots__ = ("names", "m", "v", "step", "lr", "beta1", "beta2", "eps", "weight_decay")

    def __init__(
        self,
        names: Sequence[str],
        shapes: Sequence[Tuple[int, ...]],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        if len(names) != len(shapes):
            raise ValueError(f"{len(names)} names for {len(shapes)} parameter shapes")
        if lr <= 0:
            raise ValueError(f"invalid learning rate: {lr}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError(f"invalid betas: ({beta1}, {beta2})")
        if eps < 0 or weight_decay < 0:
            raise ValueError(f"invalid eps={eps} or weight_decay={weight_decay}")
        self.names = list(names)
        self.m = [np.zeros(shape) for shape in shapes]
        self.v = [np.zeros(shape) for shape in shapes]
        self.step = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay


def adamw_step(
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamWState,
) -> AdamWState:
    """
    One AdamW update of ``params`` in place.

    Parameters whose gradient is None are left untouched. Every gradient is
    checked before any parameter changes.

    Raises:
        TrainingError: a gradient holds NaN or Inf; the message names the parameter
    """
    if len(params) != len(state.names) or len(grads) != len(params):
        raise ValueError(
            f"{len(params)} params, {len(grads)} grads, {len(state.names)} state buffers"
        )
    for name, g in zip(state.names, grads):
        if g is not None and not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter '{name}'")

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for i, (param, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        if state.weight_decay:
            param.data = param.data - state.lr * state.weight_decay * param.data
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        param.data = param.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


class AdamW(object):
    """
    AdamW over a list of named parameters.

    Example:
        >>> optimizer = AdamW(list(model.named_parameters()), lr=1e-3)
        >>> optimizer.zero_grads()
        >>> backward(loss)
        >>> optimizer.step()
    """

    def __init__(
        self,
        named_params: Sequence[Tuple[str, Tensor]],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        if not named_params:
            raise ValueError("AdamW needs at least one parameter")
        self.params: List[Tensor] = [p for _, p in named_params]
        self.state = AdamWState(
            [name for name, _ in named_params],
            [p.shape for p in self.params],
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            weight_decay=weight_decay,
        )
        logger.debug(
            "AdamW over %d tensors: lr=%s, weight_decay=%s",
            len(self.params), lr, weight_decay,
        )

    @property
    def steps(self) -> int:
        return self.state.step

    def zero_grads(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adamw_step(self.params, [p.grad for p in self.params], self.state)
