"""
Matching provider implementations.

    - OracleProvider: reads the ground-truth match flag
    - BilinearProvider: trainable bilinear scorer over mean-pooled token
      embeddings and mean-pooled patch projections, frozen after pretraining
"""

from typing import Optional

import numpy as np

from fivcmmcan.datasets.types import NewsBatch
from fivcmmcan.matchers.types.base import (
    MATCH_DIM,
    MatchingProvider,
    MatchRepresentation,
    ProviderKind,
    ProviderNotTrainedError,
)
from fivcmmcan.tensors import (
    Module,
    Tensor,
    add,
    init_constant,
    init_weight,
    matmul,
    mean_rows,
    mul,
    no_grad,
    take_rows,
)

ORACLE_MAGNITUDE = 5.0


class OracleProvider(MatchingProvider):
    """Emits ``(+c, -c)`` for matched items and ``(-c, +c)`` otherwise."""

    def __init__(self, magnitude: float = ORACLE_MAGNITUDE):
        self.magnitude = magnitude

    @property
    def kind(self) -> ProviderKind:
        return ProviderKind.ORACLE

    def __call__(self, batch: NewsBatch) -> MatchRepresentation:
        sign = np.where(batch.match_flags, 1.0, -1.0)
        return MatchRepresentation(self.magnitude * np.stack([sign, -sign], axis=-1))


class BilinearProvider(Module, MatchingProvider):
    """
    logits = ((t W_B) * v) W_h + b_h

    where ``t`` is the mean embedding of the non-pad tokens and ``v`` the
    projected mean patch. ``(t W_B) * v`` summed against ``W_h`` is a
    bilinear form in ``t`` and ``v``.
    """

    def __init__(
        self,
        vocab_size: int,
        p: int,
        d: int,
        rng: np.random.Generator,
        pad_id: int = 0,
    ):
        self.embedding = init_weight(rng, (vocab_size, d), fan_in=d)
        self.W_patch = init_weight(rng, (p, d))
        self.b_patch = init_constant((d,))
        self.W_bilinear = init_weight(rng, (d, d))
        self.W_head = init_weight(rng, (d, MATCH_DIM))
        self.b_head = init_constant((MATCH_DIM,))
        self._pad_id = pad_id
        self._trained = False
        self.accuracy: Optional[float] = None

    @property
    def kind(self) -> ProviderKind:
        return ProviderKind.BILINEAR

    @property
    def trained(self) -> bool:
        return self._trained

    def mark_trained(self, accuracy: Optional[float]) -> None:
        self.accuracy = accuracy
        self._trained = True

    def logits(self, batch: NewsBatch) -> Tensor:
        """Differentiable logits ``(batch, 2)`` (used by pretraining)."""
        tokens, vocab_size = batch.tokens, self.embedding.shape[0]
        if tokens.size and (tokens.min() < 0 or tokens.max() >= vocab_size):
            bad = tokens[(tokens < 0) | (tokens >= vocab_size)][0]
            raise ValueError(f"out-of-vocabulary token id {int(bad)} (vocab size {vocab_size})")
        mask = batch.tokens != self._pad_id
        counts = np.maximum(mask.sum(axis=1, keepdims=True), 1)
        embedded = mul(take_rows(self.embedding, batch.tokens), Tensor(mask[..., None]))
        text = mul(mean_rows(embedded), Tensor(batch.tokens.shape[1] / counts))
        image = add(matmul(Tensor(batch.patches.mean(axis=1)), self.W_patch), self.b_patch)
        joint = mul(matmul(text, self.W_bilinear), image)
        return add(matmul(joint, self.W_head), self.b_head)

    def __call__(self, batch: NewsBatch) -> MatchRepresentation:
        if not self._trained:
            raise ProviderNotTrainedError(
                "bilinear matching provider used before pretraining"
            )
        with no_grad():
            return MatchRepresentation(self.logits(batch))
