"""
Classifier heads, losses, variant forward paths and inference.

Training objective of the full model (batch means):

    L = CE(P^T) + CE(P^V) + lambda_KL * (KL(P^V || P^T) + KL(P^T || P^V))

where the first KL term regularizes the vision-centered network towards the
text-centered one and the second the reverse. At inference the two heads'
probabilities are averaged.

Example:
    >>> from fivcmmcan.models import ModelConfig, create_model, forward_variant, infer
    >>> model = create_model(ModelConfig(), provider, variant="full", seed=0)
    >>> out = forward_variant(batch, model, train=True)
    >>> out.loss.backward()
    >>> probs, labels = infer(batch, model)
"""

__all__ = [
    "NUM_CLASSES",
    "DEFAULT_LAMBDA_KL",
    "Variant",
    "VariantError",
    "VariantOutput",
    "ModelConfig",
    "ClassifierHead",
    "MMCANModel",
    "classify",
    "cross_entropy",
    "kl_divergence",
    "mutual_loss_terms",
    "total_loss",
    "average_probabilities",
    "encode_batch",
    "forward_variant",
    "infer",
    "create_model",
]

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from fivcmmcan.coattention import forward_network
from fivcmmcan.datasets import NewsBatch, NewsItem
from fivcmmcan.matchers import MatchingProvider
from fivcmmcan.models.types import (
    NUM_CLASSES,
    Variant,
    VariantError,
    VariantOutput,
    ModelConfig,
    ClassifierHead,
    MMCANModel,
)
from fivcmmcan.tensors import (
    Tensor,
    add,
    concat,
    log,
    matmul,
    mean_rows,
    mul,
    no_grad,
    reshape,
    scale,
    softmax_rows,
    sub,
    sum_all,
    sum_rows,
)

DEFAULT_LAMBDA_KL = 0.01


def _as_batch(probs: Tensor) -> Tensor:
    return reshape(probs, (1, probs.shape[-1])) if probs.data.ndim == 1 else probs


def _classify_pooled(pooled: Tensor, W: Tensor, b: Tensor) -> Tensor:
    single = pooled.data.ndim == 1
    probs = softmax_rows(add(matmul(_as_batch(pooled), W), b))
    return reshape(probs, (NUM_CLASSES,)) if single else probs


def classify(fusion: Tensor, head: ClassifierHead | Tuple[Tensor, Tensor]) -> Tensor:
    """softmax(mean_pool(fusion) W + b); ``(..., L, d) -> (..., 2)``."""
    W, b = (head.W, head.b) if isinstance(head, ClassifierHead) else head
    return _classify_pooled(mean_rows(fusion), W, b)


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """
    Mean over the batch of -[y log p + (1 - y) log(1 - p)], p = P(fake).

    Probabilities are clamped at 1e-12 inside the log.
    """
    probs = _as_batch(probs)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape[0] != probs.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {probs.shape[0]} predictions")
    targets = Tensor(np.eye(NUM_CLASSES)[labels])
    return scale(sum_all(mul(log(probs), targets)), -1.0 / labels.shape[0])


def kl_divergence(p: Tensor, q: Tensor) -> Tensor:
    """Mean over the batch of sum_i p_i log(p_i / q_i), with 0 log 0 = 0."""
    p, q = _as_batch(p), _as_batch(q)
    per_item = sum_rows(mul(p, sub(log(p), log(q))))
    return scale(sum_all(per_item), 1.0 / p.shape[0])


def mutual_loss_terms(
    probs_text: Tensor,
    probs_vision: Tensor,
    labels,
    detach_peer: bool = False,
) -> Dict[str, Tensor]:
    """
    The four loss terms of mutual learning.

    ``kl_text_to_vision`` = KL(P^V || P^T) pulls the vision-centered network
    towards the text-centered one; ``kl_vision_to_text`` = KL(P^T || P^V)
    the reverse. With ``detach_peer`` the imitated side is a constant.
    """
    target_text = probs_text.detach() if detach_peer else probs_text
    target_vision = probs_vision.detach() if detach_peer else probs_vision
    return {
        "ce_text": cross_entropy(probs_text, labels),
        "ce_vision": cross_entropy(probs_vision, labels),
        "kl_text_to_vision": kl_divergence(probs_vision, target_text),
        "kl_vision_to_text": kl_divergence(probs_text, target_vision),
    }


def total_loss(
    probs_text: Tensor,
    probs_vision: Tensor,
    labels,
    lambda_kl: float = DEFAULT_LAMBDA_KL,
    detach_peer: bool = False,
) -> Tensor:
    """L = CE^T + CE^V + lambda_KL (KL^{T->V} + KL^{V->T}); exactly CE^T + CE^V at lambda 0."""
    if lambda_kl < 0:
        raise ValueError(f"lambda_kl must be non-negative, got {lambda_kl}")
    classification = add(cross_entropy(probs_text, labels), cross_entropy(probs_vision, labels))
    if lambda_kl == 0:
        return classification
    terms = mutual_loss_terms(probs_text, probs_vision, labels, detach_peer)
    mutual = add(terms["kl_text_to_vision"], terms["kl_vision_to_text"])
    return add(classification, scale(mutual, lambda_kl))


def average_probabilities(probs_text, probs_vision) -> np.ndarray:
    """Arithmetic mean of the two heads' probabilities."""
    a = probs_text.data if isinstance(probs_text, Tensor) else np.asarray(probs_text)
    b = probs_vision.data if isinstance(probs_vision, Tensor) else np.asarray(probs_vision)
    return (a + b) / 2.0


def encode_batch(
    batch: NewsBatch,
    model: MMCANModel,
    train: bool = False,
) -> Tuple[Tensor, Tensor, np.ndarray]:
    """H^T, H^V and the text key mask of a batch."""
    rng = model.dropout_rng if train else None
    h_text, _ = model.text_encoder(batch.tokens, train=train, rng=rng)
    h_vision, _ = model.image_encoder(batch.patches, train=train, rng=rng)
    return h_text, h_vision, model.text_encoder.key_mask(batch.tokens)


def _check_variant(model: MMCANModel, variant: Variant) -> None:
    if (variant == Variant.CONCAT) != (model.joint_head is not None):
        raise VariantError(
            f"variant '{variant.value}' does not fit a model built as '{model.variant.value}'"
        )


def forward_variant(
    batch: NewsBatch,
    model: MMCANModel,
    train: bool = False,
    variant: Optional[Variant | str] = None,
    lambda_kl: float = DEFAULT_LAMBDA_KL,
    detach_peer: bool = False,
    compute_loss: bool = True,
) -> VariantOutput:
    """
    Forward pass of one variant, with its training loss.

    - FULL: both gated networks, CE + lambda_KL mutual KL
    - WITHOUT_MATCH: gate bypassed in both networks, same objective
    - TEXT_ONLY / VISION_ONLY: one network, its CE alone
    - CONCAT: joint head over concatenated pooled fusions, its CE
    - AVG: both gated networks, CE terms only

    Raises:
        VariantError: CONCAT requested without a joint head, or the reverse
    """
    variant = Variant(variant or model.variant)
    _check_variant(model, variant)

    rng = model.dropout_rng if train else None
    h_text, h_vision, text_mask = encode_batch(batch, model, train)
    gate_open = variant == Variant.WITHOUT_MATCH
    hm = None if gate_open else model.matcher(batch)

    fused_text = fused_vision = None
    if variant != Variant.VISION_ONLY:
        fused_text = forward_network(
            h_text, h_vision, hm, model.text_network, train, rng, text_mask, gate_open
        )
    if variant != Variant.TEXT_ONLY:
        fused_vision = forward_network(
            h_text, h_vision, hm, model.vision_network, train, rng, text_mask, gate_open
        )

    out = VariantOutput()
    if variant == Variant.CONCAT:
        pooled = concat([mean_rows(fused_text), mean_rows(fused_vision)])
        out.probs_joint = _classify_pooled(pooled, model.joint_head.W, model.joint_head.b)
    else:
        if fused_text is not None:
            out.probs_text = classify(fused_text, model.text_head)
        if fused_vision is not None:
            out.probs_vision = classify(fused_vision, model.vision_head)

    if not compute_loss:
        return out

    labels = batch.labels
    if variant == Variant.CONCAT:
        out.loss = cross_entropy(out.probs_joint, labels)
    elif variant == Variant.TEXT_ONLY:
        out.loss = cross_entropy(out.probs_text, labels)
    elif variant == Variant.VISION_ONLY:
        out.loss = cross_entropy(out.probs_vision, labels)
    else:
        weight = 0.0 if variant == Variant.AVG else lambda_kl
        out.loss = total_loss(out.probs_text, out.probs_vision, labels, weight, detach_peer)
    out.terms = {"loss": out.loss.item()}
    return out


def infer(
    items: NewsBatch | NewsItem | Sequence[NewsItem],
    model: MMCANModel,
    variant: Optional[Variant | str] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Final probabilities and predicted labels (eval mode, no tape).

    Two-network variants average P^T and P^V; single-network variants use
    their own head; CONCAT uses the joint head. A single item yields a
    ``(2,)`` probability vector and an int label.
    """
    single = isinstance(items, NewsItem)
    if single:
        items = [items]
    batch = items if isinstance(items, NewsBatch) else NewsBatch(list(items), m=model.config.m, pad_id=model.config.pad_id)
    variant = Variant(variant or model.variant)

    with no_grad():
        out = forward_variant(batch, model, train=False, variant=variant, compute_loss=False)

    if variant == Variant.CONCAT:
        probs = out.probs_joint.data
    elif variant == Variant.TEXT_ONLY:
        probs = out.probs_text.data
    elif variant == Variant.VISION_ONLY:
        probs = out.probs_vision.data
    else:
        probs = average_probabilities(out.probs_text, out.probs_vision)

    labels = np.argmax(probs, axis=-1)
    if single:
        return probs[0], int(labels[0])
    return probs, labels


def create_model(
    config: ModelConfig,
    provider: MatchingProvider,
    variant: Variant | str = Variant.FULL,
    seed: int = 0,
) -> MMCANModel:
    """Build a freshly initialized model for ``variant``."""
    return MMCANModel(config, provider, Variant(variant), seed)
