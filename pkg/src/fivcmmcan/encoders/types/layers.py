"""
Attention and transformer layers.

These layers are shared by the modality encoders and by the self-attention
unit of the co-attention networks. Key masks are boolean arrays shaped
``(batch, keys)`` with True for real (non-pad) keys; masked keys get an
additive -1e9 on their logits, so their softmax weight underflows to 0.
"""

from typing import List, Optional, Tuple

import numpy as np

from fivcmmcan.tensors import (
    Module,
    Tensor,
    add,
    concat,
    dropout,
    init_constant,
    init_weight,
    layer_norm_rows,
    matmul,
    relu,
    scale,
    softmax_rows,
    transpose,
)

MASK_VALUE = -1e9
LAYER_NORM_EPS = 1e-5


def mask_bias(key_mask: Optional[np.ndarray]) -> Optional[Tensor]:
    """Additive logit bias ``(batch, 1, keys)`` for a boolean key mask."""
    if key_mask is None:
        return None
    key_mask = np.asarray(key_mask, dtype=bool)
    return Tensor(np.where(key_mask, 0.0, MASK_VALUE)[..., None, :])


def scaled_dot_attention(
    q: Tensor, k: Tensor, v: Tensor, key_mask: Optional[np.ndarray] = None
) -> Tuple[Tensor, np.ndarray]:
    """softmax(Q K^T / sqrt(d_k)) V, returning the output and the weights."""
    scores = scale(matmul(q, transpose(k)), 1.0 / np.sqrt(q.shape[-1]))
    bias = mask_bias(key_mask)
    if bias is not None:
        scores = add(scores, bias)
    weights = softmax_rows(scores)
    return matmul(weights, v), weights.data


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = LAYER_NORM_EPS):
        self.gamma = init_constant((d,), 1.0)
        self.beta = init_constant((d,), 0.0)
        self._eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm_rows(x, self.gamma, self.beta, self._eps)


class AttentionHead(Module):
    """Query/key/value projections of one head, each ``d x d/h``."""

    def __init__(self, d: int, head_dim: int, rng: np.random.Generator):
        self.W_q = init_weight(rng, (d, head_dim))
        self.W_k = init_weight(rng, (d, head_dim))
        self.W_v = init_weight(rng, (d, head_dim))

    def project(self, queries: Tensor, keys_values: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
        return (
            matmul(queries, self.W_q),
            matmul(keys_values, self.W_k),
            matmul(keys_values, self.W_v),
        )


class MultiHeadAttention(Module):
    """
    Multi-head attention with per-head projections and an output projection.

    Heads are concatenated along the feature axis before ``W_o``.
    """

    def __init__(self, d: int, heads: int, rng: np.random.Generator):
        if heads < 1 or d % heads:
            raise ValueError(f"model dimension {d} is not divisible by {heads} heads")
        self.heads = [AttentionHead(d, d // heads, rng) for _ in range(heads)]
        self.W_o = init_weight(rng, (d, d))
        self.b_o = init_constant((d,))

    def __call__(
        self,
        queries: Tensor,
        keys_values: Tensor,
        key_mask: Optional[np.ndarray] = None,
    ) -> Tuple[Tensor, List[np.ndarray]]:
        outputs, weights = [], []
        for head in self.heads:
            q, k, v = head.project(queries, keys_values)
            out, w = scaled_dot_attention(q, k, v, key_mask)
            outputs.append(out)
            weights.append(w)
        merged = add(matmul(concat(outputs), self.W_o), self.b_o)
        return merged, weights


class FeedForward(Module):
    """d -> 4d -> d with ReLU."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.W_1 = init_weight(rng, (d, 4 * d))
        self.b_1 = init_constant((4 * d,))
        self.W_2 = init_weight(rng, (4 * d, d))
        self.b_2 = init_constant((d,))

    def __call__(self, x: Tensor) -> Tensor:
        hidden = relu(add(matmul(x, self.W_1), self.b_1))
        return add(matmul(hidden, self.W_2), self.b_2)


class TransformerLayer(Module):
    """
    Post-norm transformer encoder layer:
    ``H = LN(X + MHA(X, X))``, ``O = LN(H + Dropout(FFN(H)))``.
    """

    def __init__(
        self,
        d: int,
        heads: int,
        rng: np.random.Generator,
        dropout_rate: float = 0.0,
    ):
        self.attention = MultiHeadAttention(d, heads, rng)
        self.norm_attention = LayerNorm(d)
        self.ffn = FeedForward(d, rng)
        self.norm_ffn = LayerNorm(d)
        self._dropout_rate = dropout_rate

    def __call__(
        self,
        x: Tensor,
        key_mask: Optional[np.ndarray] = None,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[Tensor, List[np.ndarray]]:
        attended, weights = self.attention(x, x, key_mask)
        hidden = self.norm_attention(add(x, attended))
        expanded = dropout(self.ffn(hidden), self._dropout_rate, train, rng)
        return self.norm_ffn(add(hidden, expanded)), weights
