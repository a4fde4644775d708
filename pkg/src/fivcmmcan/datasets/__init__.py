"""
Synthetic multimodal news and its JSON-lines persistence.

Generative process per item (randomness derived from ``(seed, id)``):
    1. label ~ Bernoulli(fake_rate)
    2. text topic k uniform over K topics
    3. with probability mismatch_rate(label) the image shows another topic
    4. tokens: each from topic k's block with probability topic_word_prob,
       otherwise a common word; with probability signal_strength the item is
       cued and topic words come from the label-leaning half of the block
    5. patches: the image topic's latent vector through a fixed per-patch
       random projection, plus Gaussian noise

Example:
    >>> from fivcmmcan.datasets import GeneratorConfig, generate_dataset
    >>> train, val, test = generate_dataset(GeneratorConfig(seed=7))
    >>> len(train), len(val), len(test)
    (700, 100, 200)
"""

__all__ = [
    "NewsItem",
    "NewsBatch",
    "GeneratorConfig",
    "DatasetFormatError",
    "generate_dataset",
    "generate_item",
    "topic_blocks",
    "iter_batches",
    "save_jsonl",
    "load_jsonl",
]

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from fivcmmcan.datasets.types import (
    NewsItem,
    NewsBatch,
    GeneratorConfig,
    DatasetFormatError,
)

logger = logging.getLogger(__name__)


def topic_blocks(cfg: GeneratorConfig) -> List[range]:
    """Disjoint vocabulary id ranges owned by each topic."""
    size = cfg.block_size
    return [range(1 + k * size, 1 + (k + 1) * size) for k in range(cfg.topics)]


def _common_words(cfg: GeneratorConfig) -> range:
    return range(1 + cfg.topics * cfg.block_size, cfg.vocab_size)


def _structure(cfg: GeneratorConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Topic latents ``(K, latent)`` and per-patch projections ``(n, latent, p)``."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    latents = rng.normal(size=(cfg.topics, cfg.latent_dim))
    projections = rng.normal(
        scale=1.0 / np.sqrt(cfg.latent_dim), size=(cfg.n, cfg.latent_dim, cfg.p)
    )
    return latents, projections


def generate_item(
    cfg: GeneratorConfig,
    item_id: int,
    structure: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> NewsItem:
    """Draw one item; depends only on ``(cfg, item_id)``."""
    latents, projections = structure if structure is not None else _structure(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(item_id,)))

    label = int(rng.random() < cfg.fake_rate)
    topic = int(rng.integers(cfg.topics))
    rate = cfg.mismatch_rate_fake if label else cfg.mismatch_rate_real
    mismatch = bool(rng.random() < rate)
    image_topic = (topic + 1 + int(rng.integers(cfg.topics - 1))) % cfg.topics if mismatch else topic

    length = int(rng.integers(max(1, cfg.m // 2), cfg.m + 1))
    block = topic_blocks(cfg)[topic]
    if rng.random() < cfg.signal_strength:
        half = len(block) // 2
        block = block[half:] if label else block[:half]
    common = _common_words(cfg)
    from_topic = rng.random(length) < cfg.topic_word_prob
    topic_ids = rng.integers(block.start, block.stop, size=length)
    common_ids = rng.integers(common.start, common.stop, size=length) if len(common) else topic_ids
    tokens = np.where(from_topic, topic_ids, common_ids).tolist()
    tokens += [0] * (cfg.m - length)

    clean = np.einsum("l,nlp->np", latents[image_topic], projections)
    patches = clean + cfg.noise_sigma * rng.normal(size=(cfg.n, cfg.p))

    return NewsItem(
        id=item_id,
        tokens=tokens,
        patches=patches.tolist(),
        match_flag=not mismatch,
        label=label,
    )


def generate_dataset(
    cfg: GeneratorConfig, workers: int = 1
) -> Tuple[List[NewsItem], List[NewsItem], List[NewsItem]]:
    """
    Generate the train, validation and test splits.

    Item ids run consecutively over train, val, test. Output is identical for
    a fixed seed whatever the number of workers.

    Raises:
        ValueError: fewer than two topics, or a vocabulary too small to give
            every topic a block of at least two words.
    """
    if cfg.topics < 2:
        raise ValueError(f"need at least 2 topics, got {cfg.topics}")
    if cfg.block_size < 2:
        raise ValueError(
            f"vocab_size {cfg.vocab_size} too small for {cfg.topics} disjoint topic blocks"
        )

    structure = _structure(cfg)
    total = cfg.n_train + cfg.n_val + cfg.n_test
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(lambda i: generate_item(cfg, i, structure), range(total)))
    else:
        items = [generate_item(cfg, i, structure) for i in range(total)]

    logger.info(
        "generated %d items (%d/%d/%d), seed %d",
        total, cfg.n_train, cfg.n_val, cfg.n_test, cfg.seed,
    )
    train_end = cfg.n_train
    val_end = train_end + cfg.n_val
    return items[:train_end], items[train_end:val_end], items[val_end:]


def iter_batches(
    items: Sequence[NewsItem],
    batch_size: int,
    m: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Iterator[NewsBatch]:
    """Yield batches in order, or shuffled when ``rng`` is given."""
    order = np.arange(len(items)) if rng is None else rng.permutation(len(items))
    for start in range(0, len(items), batch_size):
        yield NewsBatch([items[i] for i in order[start : start + batch_size]], m=m)


def save_jsonl(items: Sequence[NewsItem], path: str | Path) -> None:
    """Write one JSON record per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            f.write(json.dumps(item.model_dump(by_alias=True)))
            f.write("\n")


def load_jsonl(path: str | Path) -> List[NewsItem]:
    """
    Read items written by ``save_jsonl``.

    Raises:
        DatasetFormatError: a line is not valid JSON, misses a field, has an
            unknown field or a badly typed value.
    """
    items = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"malformed JSON ({e.msg})", line=line_no)
            if not isinstance(record, dict):
                raise DatasetFormatError("record is not a JSON object", line=line_no)
            try:
                items.append(NewsItem.model_validate(record))
            except ValidationError as e:
                error = e.errors()[0]
                field = ".".join(str(part) for part in error["loc"]) or None
                reason = {
                    "missing": "missing field",
                    "extra_forbidden": "unknown field",
                }.get(error["type"], error["msg"])
                raise DatasetFormatError(reason, line=line_no, field=field)
    return items
