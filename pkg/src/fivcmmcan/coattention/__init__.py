"""
ITM-aware co-attention networks.

For a vision-centered network (queries H^V, keys/values H^T):

    Q_i, K_i, V_i = H^V W_Qi, H^T W_Ki, H^T W_Vi
    MH-Att        = [softmax(Q_i K_i^T / sqrt(d/h)) V_i]_i W'
    alpha^M       = sigmoid(H^M W^M + b^M)            one scalar per query
    H^C           = alpha^M * MH-Att                  broadcast over features
    O~            = LN(H^V + H^C)
    H_S           = LN(O~ + MH-Att(O~, O~))
    O^V           = LN(H_S + FFN(H_S))

The text-centered network swaps the roles of H^T and H^V. With the gate
open (``gate_open=True``) the unit reduces to traditional co-attention.
"""

__all__ = [
    "Center",
    "CoAttentionNetwork",
    "project_qkv",
    "itm_gated_coattention",
    "coattention_unit",
    "self_attention_unit",
    "forward_network",
]

from typing import List, Optional, Tuple

import numpy as np

from fivcmmcan.coattention.types import Center, CoAttentionNetwork
from fivcmmcan.encoders import scaled_dot_attention
from fivcmmcan.matchers import MatchRepresentation
from fivcmmcan.tensors import (
    Tensor,
    add,
    concat,
    dropout,
    matmul,
    mul,
    reshape,
    sigmoid,
)


def project_qkv(
    query_feats: Tensor,
    kv_feats: Tensor,
    net: CoAttentionNetwork,
    head: int,
) -> Tuple[Tensor, Tensor, Tensor]:
    """Per-head projections: Q_i ``(L_q, d/h)``, K_i and V_i ``(L_kv, d/h)``."""
    if not 0 <= head < net.heads:
        raise IndexError(f"head {head} out of range for {net.heads} heads")
    return net.coattention.heads[head].project(query_feats, kv_feats)


def itm_gated_coattention(
    query_feats: Tensor,
    kv_feats: Tensor,
    hm: Optional[MatchRepresentation],
    net: CoAttentionNetwork,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
    key_mask: Optional[np.ndarray] = None,
    gate_open: bool = False,
) -> Tuple[Tensor, List[np.ndarray]]:
    """
    H^C = alpha^M * MH-Att(queries, keys/values).

    Returns H^C (after dropout in train mode) and the per-head attention
    weights ``(batch, L_q, L_kv)``. Without ``hm`` or with ``gate_open`` the
    gate is skipped, which is the traditional co-attention.

    Raises:
        ValueError: the gate length differs from the query length
    """
    heads_out, weights = [], []
    for i in range(net.heads):
        q, k, v = project_qkv(query_feats, kv_feats, net, i)
        out, w = scaled_dot_attention(q, k, v, key_mask)
        heads_out.append(out)
        weights.append(w)
    attended = add(matmul(concat(heads_out), net.coattention.W_o), net.coattention.b_o)

    if hm is not None and not gate_open:
        query_length = query_feats.shape[-2]
        if net.query_length != query_length:
            raise ValueError(
                f"gate length {net.query_length} does not match "
                f"query sequence length {query_length}"
            )
        alpha = sigmoid(add(matmul(hm.logits, net.W_match), net.b_match))
        attended = mul(attended, reshape(alpha, query_feats.shape[:-1] + (1,)))

    return dropout(attended, net.dropout_rate, train, rng), weights


def coattention_unit(query_feats: Tensor, hc: Tensor, net: CoAttentionNetwork) -> Tensor:
    """O~ = LN(queries + H^C)."""
    return net.norm_coattention(add(query_feats, hc))


def self_attention_unit(
    x: Tensor,
    net: CoAttentionNetwork,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
    key_mask: Optional[np.ndarray] = None,
) -> Tensor:
    """O = LN(H_S + FFN(H_S)) with H_S = LN(x + MH-Att(x, x))."""
    out, _ = net.self_attention(x, key_mask=key_mask, train=train, rng=rng)
    return out


def forward_network(
    h_text: Tensor,
    h_vision: Tensor,
    hm: Optional[MatchRepresentation],
    net: CoAttentionNetwork,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
    text_mask: Optional[np.ndarray] = None,
    gate_open: bool = False,
    return_attention: bool = False,
):
    """
    Fusion features O^T (text-centered) or O^V (vision-centered).

    ``text_mask`` marks real text tokens; pads are masked wherever text
    positions act as keys. With ``return_attention`` the co-attention
    weights per head are returned alongside the features.
    """
    if net.center == Center.TEXT:
        queries, keys_values = h_text, h_vision
        cross_mask, self_mask = None, text_mask
    else:
        queries, keys_values = h_vision, h_text
        cross_mask, self_mask = text_mask, None

    hc, weights = itm_gated_coattention(
        queries, keys_values, hm, net, train=train, rng=rng,
        key_mask=cross_mask, gate_open=gate_open,
    )
    fused = self_attention_unit(
        coattention_unit(queries, hc, net), net, train=train, rng=rng, key_mask=self_mask
    )
    return (fused, weights) if return_attention else fused
