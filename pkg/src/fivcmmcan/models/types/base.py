"""
Fusion model types.

    - Variant: the full model and its ablations
    - ModelConfig: dimensions and dropout of the fusion model
    - ClassifierHead: fully connected layer followed by a softmax
    - MMCANModel: shared encoders, frozen matcher, text- and
      vision-centered co-attention networks and their classifier heads
"""

from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from fivcmmcan.coattention import Center, CoAttentionNetwork
from fivcmmcan.encoders import ImageEncoder, TextEncoder
from fivcmmcan.matchers import MatchingProvider
from fivcmmcan.tensors import Module, Tensor, init_constant, init_weight

NUM_CLASSES = 2


class Variant(str, Enum):
    """
    Model variants.

    Attributes:
        FULL: gated co-attention in both networks, mutual KL distillation
        WITHOUT_MATCH: gate bypassed (traditional co-attention), mutual KL
        TEXT_ONLY: text-centered network alone
        VISION_ONLY: vision-centered network alone
        CONCAT: one head over the concatenated pooled fusions
        AVG: both networks trained without KL, probabilities averaged
    """

    FULL = "full"
    WITHOUT_MATCH = "without_match"
    TEXT_ONLY = "text_only"
    VISION_ONLY = "vision_only"
    CONCAT = "concat"
    AVG = "avg"


class VariantError(ValueError):
    """The requested variant does not fit the model's weights."""


class ModelConfig(BaseModel):
    """Dimensions of the fusion model."""

    model_config = {"extra": "forbid"}

    vocab_size: int = Field(default=64, gt=1, description="Vocabulary size incl. pad id")
    d: int = Field(default=32, gt=0, description="Feature dimension d_t = d_v")
    heads: int = Field(default=8, gt=0, description="Attention heads h")
    m: int = Field(default=12, gt=0, description="Token sequence length")
    n: int = Field(default=9, gt=0, description="Patches per image")
    p: int = Field(default=12, gt=0, description="Flattened patch length")
    dropout: float = Field(default=0.4, ge=0.0, lt=1.0, description="Dropout rate")
    pad_id: int = Field(default=0, ge=0, description="Padding token id")

    @model_validator(mode="after")
    def _check_dims(self) -> "ModelConfig":
        if self.d % self.heads:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.d % 2:
            raise ValueError(f"d={self.d} must be even for sinusoidal positions")
        return self


class ClassifierHead(Module):
    """Linear map of a pooled feature vector to two class logits."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.W = init_weight(rng, (d, NUM_CLASSES))
        self.b = init_constant((NUM_CLASSES,))


class MMCANModel(Module):
    """
    Multimodal matching-aware co-attention model.

    Parameters are created in a fixed order from ``seed``; dropout draws
    come from a separate generator derived from the same seed. The joint
    head exists only for the CONCAT variant.
    """

    def __init__(
        self,
        config: ModelConfig,
        provider: MatchingProvider,
        variant: Variant = Variant.FULL,
        seed: int = 0,
    ):
        rng = np.random.default_rng(seed)
        d, heads, rate = config.d, config.heads, config.dropout
        self.text_encoder = TextEncoder(
            config.vocab_size, d, heads, config.m, rng, config.pad_id, rate
        )
        self.image_encoder = ImageEncoder(config.p, d, heads, config.n, rng, rate)
        self.text_network = CoAttentionNetwork(Center.TEXT, d, heads, config.m, rng, rate)
        self.vision_network = CoAttentionNetwork(Center.VISION, d, heads, config.n, rng, rate)
        self.text_head = ClassifierHead(d, rng)
        self.vision_head = ClassifierHead(d, rng)
        self.joint_head: Optional[ClassifierHead] = (
            ClassifierHead(2 * d, rng) if Variant(variant) == Variant.CONCAT else None
        )
        self.matcher = provider
        self._config = config
        self._variant = Variant(variant)
        self._seed = seed
        self._dropout_rng = np.random.default_rng([seed, 1])

    @property
    def config(self) -> ModelConfig:
        return self._config

    @property
    def variant(self) -> Variant:
        return self._variant

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def dropout_rng(self) -> np.random.Generator:
        return self._dropout_rng

    def reseed_dropout(self, seed: int) -> None:
        self._dropout_rng = np.random.default_rng([seed, 1])

    def trainable_parameters(self, variant: Optional[Variant] = None) -> List[tuple]:
        """Named parameters the variant's objective depends on."""
        variant = Variant(variant or self._variant)
        groups: Dict[str, Module] = {
            "text_encoder": self.text_encoder,
            "image_encoder": self.image_encoder,
        }
        if variant != Variant.VISION_ONLY:
            groups["text_network"] = self.text_network
        if variant != Variant.TEXT_ONLY:
            groups["vision_network"] = self.vision_network
        if variant == Variant.CONCAT:
            groups["joint_head"] = self.joint_head
        else:
            if variant != Variant.VISION_ONLY:
                groups["text_head"] = self.text_head
            if variant != Variant.TEXT_ONLY:
                groups["vision_head"] = self.vision_head
        named = []
        for prefix, module in groups.items():
            named.extend(module.named_parameters(f"{prefix}."))
        return named


class VariantOutput(object):
    """Probabilities produced by a variant's forward pass, plus its loss."""

    __slots__ = ("probs_text", "probs_vision", "probs_joint", "loss", "terms")

    def __init__(
        self,
        probs_text: Optional[Tensor] = None,
        probs_vision: Optional[Tensor] = None,
        probs_joint: Optional[Tensor] = None,
        loss: Optional[Tensor] = None,
        terms: Optional[Dict[str, float]] = None,
    ):
        self.probs_text = probs_text
        self.probs_vision = probs_vision
        self.probs_joint = probs_joint
        self.loss = loss
        self.terms = terms or {}
