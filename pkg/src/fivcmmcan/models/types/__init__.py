__all__ = [
    "NUM_CLASSES",
    "Variant",
    "VariantError",
    "VariantOutput",
    "ModelConfig",
    "ClassifierHead",
    "MMCANModel",
]

from .base import (
    NUM_CLASSES,
    Variant,
    VariantError,
    VariantOutput,
    ModelConfig,
    ClassifierHead,
    MMCANModel,
)
