"""
Image-text matching representation (H^M) providers.

The gate of the co-attention unit needs, for every news item, two logits
saying whether the image matches the text. Providers are looked up by kind
in ``default_retriever``:

    - "oracle": reads the ground-truth match flag (unit tests)
    - "bilinear": a bilinear scorer pretrained on the match flags of the
      training split, then frozen (experiments)

Example:
    >>> from fivcmmcan.matchers import create_provider, itm_representation
    >>> provider = create_provider("bilinear", dataset=train, vocab_size=64)
    >>> hm = itm_representation(test[:8], provider)
"""

__all__ = [
    "MATCH_DIM",
    "MatchRepresentation",
    "MatchingProvider",
    "ProviderKind",
    "ProviderNotTrainedError",
    "OracleProvider",
    "BilinearProvider",
    "ProvidersRetriever",
    "provider_creator",
    "itm_representation",
    "matching_accuracy",
    "pretrain_bilinear_matcher",
    "create_provider",
    "default_retriever",
]

import logging
from typing import List, Optional, Sequence

import numpy as np

from fivcmmcan.datasets import GeneratorConfig, NewsBatch, NewsItem, iter_batches
from fivcmmcan.matchers.types import (
    MATCH_DIM,
    MatchRepresentation,
    MatchingProvider,
    ProviderKind,
    ProviderNotTrainedError,
    OracleProvider,
    BilinearProvider,
    ProvidersRetriever,
    provider_creator,
)
from fivcmmcan.tensors import (
    Tensor,
    backward,
    log,
    mul,
    no_grad,
    scale,
    softmax_rows,
    sum_all,
)
from fivcmmcan.utils import DefaultKwargs, LazyValue

logger = logging.getLogger(__name__)

_DEFAULT_BILINEAR_ARGS = DefaultKwargs(
    {
        "epochs": 20,
        "lr": 0.01,
        "d": 32,
        "batch_size": 64,
        "seed": 0,
        "vocab_size": GeneratorConfig.model_fields["vocab_size"].default,
    }
)


def itm_representation(
    items: NewsBatch | NewsItem | Sequence[NewsItem],
    provider: MatchingProvider,
) -> MatchRepresentation:
    """H^M = ITM-head(pair) for a single item, a list of items or a batch."""
    if isinstance(items, NewsItem):
        items = [items]
    batch = items if isinstance(items, NewsBatch) else NewsBatch(list(items))
    return provider(batch)


def _match_targets(batch: NewsBatch) -> np.ndarray:
    # column 0 is "match", column 1 "mismatch"
    return np.stack([batch.match_flags, ~batch.match_flags], axis=-1).astype(np.float64)


def matching_accuracy(
    provider: MatchingProvider | BilinearProvider,
    items: Sequence[NewsItem],
    batch_size: int = 256,
) -> float:
    """Fraction of items whose match flag the provider predicts correctly."""
    if not items:
        raise ValueError("cannot measure matching accuracy on no items")
    correct = 0
    with no_grad():
        for batch in iter_batches(items, batch_size):
            if isinstance(provider, BilinearProvider):
                logits = provider.logits(batch).data
            else:
                logits = provider(batch).logits.data
            correct += int(np.sum((logits[:, 0] > logits[:, 1]) == batch.match_flags))
    return correct / len(items)


def pretrain_bilinear_matcher(
    dataset: Sequence[NewsItem],
    epochs: int = 20,
    lr: float = 0.01,
    d: int = 32,
    batch_size: int = 64,
    seed: int = 0,
    vocab_size: int = GeneratorConfig.model_fields["vocab_size"].default,
    m: Optional[int] = None,
    validation: Optional[Sequence[NewsItem]] = None,
) -> BilinearProvider:
    """
    Train a bilinear provider on the match flags of ``dataset``, then freeze it.

    With ``epochs == 0`` the provider is returned frozen but untrained, and
    using it raises ``ProviderNotTrainedError``.

    ``vocab_size`` must cover every token id of the items the provider will
    ever score, held-out splits included.

    Raises:
        ValueError: empty dataset, or a token id outside the vocabulary
    """
    from fivcmmcan.training.types.optimizers import AdamW

    if not dataset:
        raise ValueError("cannot pretrain a matching provider on an empty dataset")

    p = len(dataset[0].patches[0])
    provider = BilinearProvider(vocab_size, p, d, np.random.default_rng(seed))
    if epochs == 0:
        provider.freeze()
        logger.warning("bilinear matching provider left untrained (epochs=0)")
        return provider

    optimizer = AdamW(list(provider.named_parameters()), lr=lr, weight_decay=0.0)
    for epoch in range(epochs):
        total = 0.0
        shuffle = np.random.default_rng([seed, epoch])
        for batch in iter_batches(dataset, batch_size, m=m, rng=shuffle):
            optimizer.zero_grads()
            probs = softmax_rows(provider.logits(batch))
            loss = scale(sum_all(mul(log(probs), Tensor(_match_targets(batch)))), -1.0 / len(batch))
            backward(loss)
            optimizer.step()
            total += loss.item() * len(batch)
        logger.debug("matcher epoch %d: loss %.6f", epoch + 1, total / len(dataset))

    accuracy = matching_accuracy(provider, dataset)
    provider.mark_trained(accuracy)
    provider.freeze()
    logger.info("bilinear matcher pretrained: train accuracy %.4f", accuracy)
    if validation:
        logger.info(
            "bilinear matcher held-out accuracy %.4f",
            matching_accuracy(provider, validation),
        )
    return provider


@provider_creator("oracle")
def _create_oracle(magnitude: float = 5.0, **kwargs) -> MatchingProvider:
    """Ground-truth match flags as saturating logits."""
    return OracleProvider(magnitude=magnitude)


@provider_creator("bilinear")
def _create_bilinear(dataset: Sequence[NewsItem] = (), **kwargs) -> MatchingProvider:
    """Bilinear scorer pretrained on the dataset's match flags."""
    return pretrain_bilinear_matcher(dataset, **_DEFAULT_BILINEAR_ARGS(kwargs))


def _load_retriever() -> ProvidersRetriever:
    retriever = ProvidersRetriever()
    retriever.add_batch([_create_oracle, _create_bilinear])
    logger.debug("registered matching providers: %s", [c.name for c in retriever.get_all()])
    return retriever


def create_provider(kind: str | ProviderKind, **kwargs) -> MatchingProvider:
    """Build a provider of the given kind from the default registry."""
    name = kind.value if isinstance(kind, ProviderKind) else kind
    creator = default_retriever.get(name)
    if creator is None:
        available: List[str] = [c.name for c in default_retriever.get_all()]
        raise ValueError(f"unknown matching provider '{name}', available: {available}")
    return creator(**kwargs)


default_retriever = LazyValue(_load_retriever)
