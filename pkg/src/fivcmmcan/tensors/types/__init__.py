"""
Tensor types module.

Core data structures and primitives of the differentiation engine:
- Tensor, TapeRecord, Tape: values, recorded ops and their ordering
- Module: named parameter containers
- functions: differentiable primitives
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
]

from .base import (
    Tensor,
    Tape,
    TapeRecord,
    DimensionError,
    GradientError,
    backward,
    no_grad,
    is_grad_enabled,
)
from .modules import Module, init_weight, init_constant, zero_grads
