"""
Experiment configuration types.

    - ProviderConfig: which matching provider feeds the gate and how it is built
    - ExperimentConfig: data source, model dimensions, training settings,
      seeds and output directory of a run, suite or sweep
    - ConfigError: one line per offending field, ``<dotted.path>: <message>``

Configs are single JSON or YAML documents; unknown fields are rejected.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from fivcmmcan.datasets import GeneratorConfig
from fivcmmcan.matchers import ProviderKind
from fivcmmcan.models import ModelConfig
from fivcmmcan.training import TrainConfig

DEFAULT_LAMBDA_GRID = [5e-5, 5e-4, 5e-3, 1e-2, 5e-2, 5e-1]

SPLIT_FILES = ("train.jsonl", "val.jsonl", "test.jsonl")


class ConfigError(ValueError):
    """Invalid experiment configuration."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))

    @classmethod
    def from_validation_error(cls, e: ValidationError, prefix: str = "") -> "ConfigError":
        lines = []
        for err in e.errors():
            path = ".".join(str(part) for part in err["loc"]) or "<root>"
            lines.append(f"{prefix}{path}: {err['msg']}")
        return cls(lines)


class ProviderConfig(BaseModel):
    """Matching provider settings."""

    model_config = {"extra": "forbid"}

    kind: ProviderKind = Field(default=ProviderKind.BILINEAR, description="Provider kind")
    epochs: int = Field(default=20, ge=0, description="Bilinear pretraining epochs")
    lr: float = Field(default=0.01, gt=0.0, description="Bilinear pretraining learning rate")
    d: int = Field(default=32, gt=0, description="Bilinear embedding width")
    batch_size: int = Field(default=64, gt=0, description="Bilinear pretraining batch size")
    magnitude: float = Field(default=5.0, gt=0.0, description="Oracle logit magnitude")
    checkpoint: Optional[str] = Field(
        default=None, description="Pretrained matcher checkpoint to reuse"
    )


class ExperimentConfig(BaseModel):
    """
    One experiment: data, model, training, provider, seeds and outputs.

    Without ``dataset`` the splits are generated from ``generator``, whose
    dimensions must then agree with ``model``. ``train.dropout`` is the
    dropout rate the model is built with.
    """

    model_config = {"extra": "forbid"}

    dataset: Optional[str] = Field(
        default=None, description="Directory holding train/val/test JSONL splits"
    )
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    provider: ProviderConfig = Field(default_factory=ProviderConfig)
    seeds: List[int] = Field(default_factory=lambda: [0], description="Seeds to run")
    lambdas: List[float] = Field(
        default_factory=lambda: list(DEFAULT_LAMBDA_GRID),
        description="lambda_KL grid of the sweep",
    )
    out: str = Field(default="outputs", description="Output directory")

    @field_validator("seeds")
    @classmethod
    def _check_seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one seed is required")
        return v

    @field_validator("lambdas")
    @classmethod
    def _check_lambdas(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one lambda value is required")
        if any(value <= 0 for value in v):
            raise ValueError("lambda values must be positive")
        return v

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        if self.dataset is not None:
            root = Path(self.dataset)
            missing = [name for name in SPLIT_FILES if not (root / name).is_file()]
            if missing:
                raise ValueError(f"dataset '{self.dataset}' lacks {', '.join(missing)}")
        else:
            for name in ("vocab_size", "m", "n", "p"):
                if getattr(self.generator, name) != getattr(self.model, name):
                    raise ValueError(
                        f"generator.{name}={getattr(self.generator, name)} "
                        f"differs from model.{name}={getattr(self.model, name)}"
                    )
        if self.provider.checkpoint is not None and not Path(self.provider.checkpoint).is_file():
            raise ValueError(f"matcher checkpoint '{self.provider.checkpoint}' not found")
        return self

    def build_model_config(self) -> ModelConfig:
        """Model dimensions with the training dropout rate."""
        return self.model.model_copy(update={"dropout": self.train.dropout})


def _read_document(path: Path) -> Dict[str, Any]:
    suffix = path.suffix.lower()
    try:
        with open(path, "r", encoding="utf-8") as f:
            if suffix in (".yml", ".yaml"):
                document = yaml.safe_load(f)
            elif suffix == ".json":
                document = json.load(f)
            else:
                raise ConfigError([f"{path}: unsupported config file type '{suffix}'"])
    except FileNotFoundError:
        raise ConfigError([f"{path}: config file not found"])
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError([f"{path}: {e}"])
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigError([f"{path}: top-level document must be a mapping"])
    return document


def load_config(
    path: Optional[str | Path] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
) -> ExperimentConfig:
    """
    Read and validate an experiment config.

    ``out`` replaces the output directory; ``seed`` replaces the seed list
    with that single seed.

    Raises:
        ConfigError: unreadable file, unknown or invalid fields
    """
    document = _read_document(Path(path)) if path is not None else {}
    if out is not None:
        document["out"] = out
    if seed is not None:
        document["seeds"] = [seed]
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError.from_validation_error(e)
