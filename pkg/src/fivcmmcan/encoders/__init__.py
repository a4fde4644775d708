"""
Intra-modality encoders.

Text:  H^T = Transformer(E^T + E^T_pos)
Image: H^V = Transformer(E^V + E^V_pos)

``encode_text`` and ``encode_image`` accept a single item (1-D ids, ``n x p``
patches) or a batch, and return features without or with the batch axis
accordingly.
"""

__all__ = [
    "TextEncoder",
    "ImageEncoder",
    "TransformerLayer",
    "MultiHeadAttention",
    "LayerNorm",
    "sinusoidal_positions",
    "pad_tokens",
    "scaled_dot_attention",
    "encode_text",
    "encode_image",
]

from typing import Optional

import numpy as np

from fivcmmcan.encoders.types import (
    TextEncoder,
    ImageEncoder,
    TransformerLayer,
    MultiHeadAttention,
    LayerNorm,
    sinusoidal_positions,
    pad_tokens,
    scaled_dot_attention,
)
from fivcmmcan.tensors import Tensor, reshape


def encode_text(
    tokens,
    enc: TextEncoder,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Encode token ids; a flat id list is padded/truncated to ``m`` first."""
    ids = np.asarray(tokens, dtype=np.int64)
    single = ids.ndim == 1
    if single:
        ids = pad_tokens(ids.tolist(), enc.m, enc.pad_id)[None, :]
    out, _ = enc(ids, train=train, rng=rng)
    return reshape(out, out.shape[1:]) if single else out


def encode_image(
    patches,
    enc: ImageEncoder,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Encode a complete patch grid (``n x p``) or a batch of them."""
    grid = np.asarray(patches, dtype=np.float64)
    single = grid.ndim == 2
    out, _ = enc(grid[None] if single else grid, train=train, rng=rng)
    return reshape(out, out.shape[1:]) if single else out
