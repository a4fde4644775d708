"""
Synthetic news data models.

This module defines:
    - NewsItem: one paired text/image news post with its ground truth
    - NewsBatch: stacked numpy view of several items, the unit every model
      component consumes
    - GeneratorConfig: knobs of the synthetic generator
    - DatasetFormatError: raised for malformed JSON-lines input

NewsItem and GeneratorConfig are Pydantic models, so they validate on
construction and serialize to the JSON-lines schema directly.
"""

import warnings
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class DatasetFormatError(ValueError):
    """Malformed dataset record; carries the 1-based line and the field name."""

    def __init__(self, message: str, line: int, field: Optional[str] = None):
        where = f"line {line}" + (f", field '{field}'" if field else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.field = field


class NewsItem(BaseModel):
    """
    A news post: token ids, a patch grid, the image-text match flag and the label.

    Attributes:
        id: Item identifier, unique across splits
        tokens: Token ids, padded with 0 up to the sequence length
        patches: ``n`` flattened patches of length ``p``
        match_flag: True when the image shows the text's topic (JSON key ``match``)
        label: 0 real, 1 fake
    """

    model_config = {"extra": "forbid", "populate_by_name": True}

    id: int = Field(description="Item identifier")
    tokens: List[int] = Field(description="Token ids")
    patches: List[List[float]] = Field(description="Patch grid, n rows of p reals")
    match_flag: bool = Field(alias="match", description="Image-text match ground truth")
    label: int = Field(ge=0, le=1, description="0 real, 1 fake")

    @field_validator("patches")
    @classmethod
    def _rectangular(cls, v: List[List[float]]) -> List[List[float]]:
        if v and len({len(row) for row in v}) != 1:
            raise ValueError("patch rows must all have the same length")
        return v


class NewsBatch(object):
    """Stacked arrays for a list of items (tokens padded/truncated to ``m``)."""

    def __init__(self, items: Sequence[NewsItem], m: Optional[int] = None, pad_id: int = 0):
        if not items:
            raise ValueError("cannot build a batch from no items")
        m = m or max(len(item.tokens) for item in items)
        tokens = np.full((len(items), m), pad_id, dtype=np.int64)
        for row, item in enumerate(items):
            ids = item.tokens[:m]
            tokens[row, : len(ids)] = ids
        self.ids = np.asarray([item.id for item in items], dtype=np.int64)
        self.tokens = tokens
        self.patches = np.asarray([item.patches for item in items], dtype=np.float64)
        self.match_flags = np.asarray([item.match_flag for item in items], dtype=bool)
        self.labels = np.asarray([item.label for item in items], dtype=np.int64)

    def __len__(self):
        return len(self.ids)


class GeneratorConfig(BaseModel):
    """
    Settings of the synthetic multimodal news generator.

    Vocabulary layout: id 0 is padding, the next ``topics`` blocks of
    ``(vocab_size - 1) // (topics + 1)`` ids belong one to each topic, and
    the remaining ids are shared common words. Within a topic block the
    first half leans real and the second half leans fake.
    """

    model_config = {"extra": "forbid"}

    topics: int = Field(default=4, description="Number of topics K")
    vocab_size: int = Field(default=64, gt=1, description="Vocabulary size incl. pad id 0")
    m: int = Field(default=12, gt=0, description="Token sequence length")
    n: int = Field(default=9, gt=0, description="Patches per image")
    p: int = Field(default=12, gt=0, description="Flattened patch length")
    latent_dim: int = Field(default=8, gt=0, description="Topic latent dimension")
    mismatch_rate_fake: float = Field(default=0.8, ge=0.0, le=1.0)
    mismatch_rate_real: float = Field(default=0.1, ge=0.0, le=1.0)
    noise_sigma: float = Field(default=0.5, ge=0.0, description="Patch noise std")
    signal_strength: float = Field(
        default=0.6, ge=0.0, le=1.0, description="Probability an item carries a text cue"
    )
    fake_rate: float = Field(default=0.5, ge=0.0, le=1.0, description="Target P(label=1)")
    topic_word_prob: float = Field(
        default=0.85, ge=0.0, le=1.0, description="Probability a token comes from the topic block"
    )
    n_train: int = Field(default=700, ge=0)
    n_val: int = Field(default=100, ge=0)
    n_test: int = Field(default=200, ge=0)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_regime(self) -> "GeneratorConfig":
        if self.mismatch_rate_fake < self.mismatch_rate_real:
            warnings.warn(
                "mismatch_rate_fake < mismatch_rate_real: "
                "mismatches will point towards real news"
            )
        return self

    @property
    def block_size(self) -> int:
        return (self.vocab_size - 1) // (self.topics + 1)
