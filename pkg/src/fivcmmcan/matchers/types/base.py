"""
Image-text matching types.

A matching provider turns a batch of news items into the matching
representation H^M: two logits per item, ordered (match, mismatch). The
co-attention gate consumes these logits as constants; providers are frozen
while the fusion model trains.
"""

from abc import ABC, abstractmethod
from enum import Enum

import numpy as np

from fivcmmcan.datasets.types import NewsBatch
from fivcmmcan.tensors import Tensor

MATCH_DIM = 2


class ProviderKind(str, Enum):
    """Available matching providers."""

    ORACLE = "oracle"
    BILINEAR = "bilinear"


class ProviderNotTrainedError(RuntimeError):
    """A trainable provider was used before pretraining."""


class MatchRepresentation(object):
    """
    Matching logits H^M, shape ``(batch, 2)``: column 0 match, column 1 mismatch.

    The logits tensor is detached from any tape.
    """

    __slots__ = ("logits",)

    def __init__(self, logits):
        values = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        if values.shape[-1] != MATCH_DIM:
            raise ValueError(f"matching logits need {MATCH_DIM} components, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("matching logits must be finite")
        self.logits = Tensor(values)

    def __len__(self):
        return self.logits.shape[0]

    def predictions(self) -> np.ndarray:
        """True where the match logit wins."""
        return self.logits.data[:, 0] > self.logits.data[:, 1]


class MatchingProvider(ABC):
    """Base class for matching providers."""

    @property
    @abstractmethod
    def kind(self) -> ProviderKind:
        """Provider kind."""

    @property
    def trained(self) -> bool:
        return True

    @abstractmethod
    def __call__(self, batch: NewsBatch) -> MatchRepresentation:
        """Matching logits for every item of ``batch``."""

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind.value}, trained={self.trained})"
