"""
Modality-centered co-attention network.

One network owns an ITM-aware co-attention unit (per-head projections,
output projection W', gate W^M/b^M, residual LayerNorm) and a self-attention
unit (a transformer encoder layer). The center decides which modality
supplies the queries.
"""

from enum import Enum

import numpy as np

from fivcmmcan.encoders import LayerNorm, MultiHeadAttention, TransformerLayer
from fivcmmcan.matchers import MATCH_DIM
from fivcmmcan.tensors import Module, init_constant, init_weight


class Center(str, Enum):
    """Which modality forms the queries."""

    TEXT = "text"
    VISION = "vision"


class CoAttentionNetwork(Module):
    """
    Attributes:
        center: Text (queries H^T) or Vision (queries H^V)
        coattention: heads with W_Qi, W_Ki, W_Vi and the output projection W'
        norm_coattention: LayerNorm of the co-attention residual
        W_match: gate weights W^M, ``(d_m, L_q)``
        b_match: gate bias b^M, ``(L_q,)``
        self_attention: transformer layer of the self-attention unit
    """

    def __init__(
        self,
        center: Center,
        d: int,
        heads: int,
        query_length: int,
        rng: np.random.Generator,
        dropout_rate: float = 0.0,
    ):
        self.center = Center(center)
        self.coattention = MultiHeadAttention(d, heads, rng)
        self.norm_coattention = LayerNorm(d)
        self.W_match = init_weight(rng, (MATCH_DIM, query_length))
        self.b_match = init_constant((query_length,))
        self.self_attention = TransformerLayer(d, heads, rng, dropout_rate)
        self._dropout_rate = dropout_rate

    @property
    def heads(self) -> int:
        return len(self.coattention.heads)

    @property
    def query_length(self) -> int:
        return self.W_match.shape[1]

    @property
    def dropout_rate(self) -> float:
        return self._dropout_rate
