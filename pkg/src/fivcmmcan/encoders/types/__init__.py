__all__ = [
    "TextEncoder",
    "ImageEncoder",
    "TransformerLayer",
    "MultiHeadAttention",
    "AttentionHead",
    "FeedForward",
    "LayerNorm",
    "sinusoidal_positions",
    "pad_tokens",
    "scaled_dot_attention",
    "mask_bias",
]

from .base import TextEncoder, ImageEncoder, sinusoidal_positions, pad_tokens
from .layers import (
    TransformerLayer,
    MultiHeadAttention,
    AttentionHead,
    FeedForward,
    LayerNorm,
    scaled_dot_attention,
    mask_bias,
)
