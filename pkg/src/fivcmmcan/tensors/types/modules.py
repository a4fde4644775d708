"""
Parameter containers.

``Module`` walks its public attributes (tensors, sub-modules and lists of
either) in definition order, which gives every parameter a stable dotted
name. Names are what checkpoints and optimizer diagnostics refer to.
"""

from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from fivcmmcan.tensors.types.base import DimensionError, Tensor


def init_weight(
    rng: np.random.Generator,
    shape: Tuple[int, ...],
    fan_in: Optional[int] = None,
) -> Tensor:
    """Normal init scaled by ``1/sqrt(fan_in)`` (first extent by default)."""
    fan_in = fan_in or shape[0]
    return Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape), requires_grad=True)


def init_constant(shape: Tuple[int, ...], value: float = 0.0) -> Tensor:
    return Tensor(np.full(shape, value, dtype=np.float64), requires_grad=True)


class Module(object):
    """Base class for anything owning parameters."""

    def named_tensors(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        """All stored tensors, trainable or frozen."""
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(value, Tensor):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_tensors(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Tensor):
                        yield f"{name}.{i}", item
                    elif isinstance(item, Module):
                        yield from item.named_tensors(f"{name}.{i}.")

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, t in self.named_tensors(prefix):
            if t.requires_grad:
                yield name, t

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def zero_grads(self) -> None:
        zero_grads(self.parameters())

    def freeze(self) -> None:
        for _, t in self.named_tensors():
            t.requires_grad = False
            t.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_tensors()}

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        tensors = dict(self.named_tensors())
        if strict:
            missing = sorted(set(tensors) - set(state))
            unexpected = sorted(set(state) - set(tensors))
            if missing or unexpected:
                raise KeyError(
                    f"state mismatch: missing={missing}, unexpected={unexpected}"
                )
        for name, values in state.items():
            if name not in tensors:
                continue
            target = tensors[name]
            if target.shape != tuple(values.shape):
                raise DimensionError(
                    f"{name}: stored shape {tuple(values.shape)} != {target.shape}"
                )
            target.data = np.array(values, dtype=np.float64)


def zero_grads(params: List[Tensor]) -> None:
    """Reset gradient buffers to zeros."""
    for p in params:
        p.zero_grad()
