"""
Modality encoders.

Both encoders add parameter-free sinusoidal positions to their input
embeddings and apply one transformer encoder layer. Text uses a trainable
embedding table over a fixed vocabulary; images use a trainable linear
projection of flattened patches.
"""

from typing import List, Optional, Tuple

import numpy as np

from fivcmmcan.encoders.types.layers import TransformerLayer
from fivcmmcan.tensors import (
    DimensionError,
    Module,
    Tensor,
    add,
    init_constant,
    init_weight,
    matmul,
    take_rows,
)


def sinusoidal_positions(length: int, d: int) -> Tensor:
    """
    Parameter-free positional encodings, shape ``(length, d)``.

    Dimension ``2i`` of position ``t`` is ``sin(t / 10000^(2i/d))`` and
    dimension ``2i+1`` the matching cosine.
    """
    if d % 2:
        raise ValueError(f"positional encoding dimension must be even, got {d}")
    positions = np.arange(length, dtype=np.float64)[:, None]
    rates = np.power(10000.0, np.arange(0, d, 2, dtype=np.float64) / d)
    table = np.zeros((length, d))
    table[:, 0::2] = np.sin(positions / rates)
    table[:, 1::2] = np.cos(positions / rates)
    return Tensor(table)


def pad_tokens(tokens, m: int, pad_id: int = 0) -> np.ndarray:
    """Keep the first ``m`` ids and right-pad with ``pad_id``."""
    ids = list(tokens)[:m]
    return np.asarray(ids + [pad_id] * (m - len(ids)), dtype=np.int64)


class TextEncoder(Module):
    """
    Token ids ``(batch, m)`` -> text features ``H^T`` ``(batch, m, d)``.

    Pad positions receive neither a positional encoding nor attention weight.
    """

    def __init__(
        self,
        vocab_size: int,
        d: int,
        heads: int,
        m: int,
        rng: np.random.Generator,
        pad_id: int = 0,
        dropout_rate: float = 0.0,
    ):
        self.embedding = init_weight(rng, (vocab_size, d), fan_in=d)
        self.layer = TransformerLayer(d, heads, rng, dropout_rate)
        self._vocab_size = vocab_size
        self._m = m
        self._pad_id = pad_id
        self._positions = sinusoidal_positions(m, d).data

    @property
    def m(self) -> int:
        return self._m

    @property
    def pad_id(self) -> int:
        return self._pad_id

    def key_mask(self, tokens: np.ndarray) -> np.ndarray:
        return np.asarray(tokens) != self._pad_id

    def __call__(
        self,
        tokens: np.ndarray,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[Tensor, List[np.ndarray]]:
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2 or tokens.shape[1] != self._m:
            raise DimensionError(
                f"expected token ids shaped (batch, {self._m}), got {tokens.shape}"
            )
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self._vocab_size):
            bad = tokens[(tokens < 0) | (tokens >= self._vocab_size)][0]
            raise ValueError(
                f"out-of-vocabulary token id {int(bad)} (vocab size {self._vocab_size})"
            )
        mask = self.key_mask(tokens)
        positions = Tensor(self._positions[None, :, :] * mask[..., None])
        x = add(take_rows(self.embedding, tokens), positions)
        return self.layer(x, key_mask=mask, train=train, rng=rng)


class ImageEncoder(Module):
    """Patch grids ``(batch, n, p)`` -> image features ``H^V`` ``(batch, n, d)``."""

    def __init__(
        self,
        p: int,
        d: int,
        heads: int,
        n: int,
        rng: np.random.Generator,
        dropout_rate: float = 0.0,
    ):
        self.projection = init_weight(rng, (p, d))
        self.projection_bias = init_constant((d,))
        self.layer = TransformerLayer(d, heads, rng, dropout_rate)
        self._n = n
        self._p = p
        self._positions = sinusoidal_positions(n, d)

    @property
    def n(self) -> int:
        return self._n

    def __call__(
        self,
        patches: np.ndarray,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[Tensor, List[np.ndarray]]:
        patches = np.asarray(patches, dtype=np.float64)
        if patches.ndim != 3 or patches.shape[1:] != (self._n, self._p):
            raise DimensionError(
                f"expected patch grids shaped (batch, {self._n}, {self._p}), "
                f"got {patches.shape}"
            )
        embedded = add(matmul(Tensor(patches), self.projection), self.projection_bias)
        x = add(embedded, self._positions)
        return self.layer(x, train=train, rng=rng)
