"""
Config-driven experiments: single runs, the ablation suite, the lambda_KL
sweep, attention dumps and checkpoint evaluation.

Layout of an output directory:

    <out>/
    ├── <variant>/seed_<seed>/{run.json, metrics.csv, history.csv, model.ckpt}
    ├── ablation.csv, ablation_runs.csv            (ablation_suite)
    └── lambda_<value>/full/seed_<seed>/...        (lambda_sweep)
        sweep.csv, sweep_runs.csv

Example:
    >>> from fivcmmcan.experiments import load_config, run, ablation_suite
    >>> config = load_config("experiment.yaml", seed=3)
    >>> records = run(config)
    >>> rows = ablation_suite(config)
"""

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "ConfigError",
    "CheckpointError",
    "ProviderConfig",
    "ExperimentConfig",
    "RunStatus",
    "RunRecord",
    "FileRunRepository",
    "TrainingRun",
    "load_config",
    "load_splits",
    "build_provider",
    "save_matcher",
    "load_matcher",
    "pretrain_matcher",
    "load_model",
    "run",
    "ablation_suite",
    "lambda_sweep",
    "sweep_trend",
    "attention_mask",
    "dump_attention",
    "evaluate_checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "write_csv",
    "read_csv",
]

import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from fivcmmcan.coattention import forward_network
from fivcmmcan.datasets import NewsBatch, NewsItem, generate_dataset, load_jsonl
from fivcmmcan.experiments.types import (
    DEFAULT_LAMBDA_GRID,
    SPLIT_FILES,
    ConfigError,
    ProviderConfig,
    ExperimentConfig,
    load_config,
    RunStatus,
    RunRecord,
    RunRepository,
    FileRunRepository,
    CheckpointError,
    save_checkpoint,
    load_checkpoint,
    write_csv,
    read_csv,
)
from fivcmmcan.experiments.types.repositories.files import METRICS_COLUMNS
from fivcmmcan.matchers import (
    BilinearProvider,
    MatchingProvider,
    ProviderKind,
    create_provider,
)
from fivcmmcan.models import MMCANModel, Variant, create_model, encode_batch
from fivcmmcan.tensors import DimensionError, no_grad
from fivcmmcan.training import (
    Metrics,
    TrainingMonitor,
    evaluate_metrics,
    fit,
)
from fivcmmcan.utils import OutputDir, Runnable, gather_runnables

logger = logging.getLogger(__name__)

Splits = Tuple[List[NewsItem], List[NewsItem], List[NewsItem]]

MASK_HIGH = 255
MASK_LOW = 76


def _as_config(config: ExperimentConfig | str | Path) -> ExperimentConfig:
    return config if isinstance(config, ExperimentConfig) else load_config(config)


def load_splits(config: ExperimentConfig) -> Splits:
    """Train, validation and test items: read from ``dataset`` or generated."""
    if config.dataset is None:
        return generate_dataset(config.generator, workers=config.train.workers)
    root = Path(config.dataset)
    train, val, test = (load_jsonl(root / name) for name in SPLIT_FILES)
    logger.info("loaded %d/%d/%d items from %s", len(train), len(val), len(test), root)
    return train, val, test


def save_matcher(provider: BilinearProvider, path: str | Path) -> Path:
    """Write a pretrained bilinear provider as a checkpoint (``matcher.*`` tensors)."""
    vocab_size, d = provider.embedding.shape
    echo = {
        "kind": ProviderKind.BILINEAR.value,
        "vocab_size": vocab_size,
        "p": provider.W_patch.shape[0],
        "d": d,
        "accuracy": provider.accuracy,
    }
    state = {f"matcher.{name}": values for name, values in provider.state_dict().items()}
    return save_checkpoint(path, state, echo)


def load_matcher(path: str | Path) -> BilinearProvider:
    """
    Read a bilinear provider written by ``save_matcher``; it comes back frozen.

    Raises:
        CheckpointError: unreadable file or not a matcher checkpoint
    """
    state, echo = load_checkpoint(path)
    if echo.get("kind") != ProviderKind.BILINEAR.value:
        raise CheckpointError(f"'{path}' does not hold a bilinear matcher")
    provider = BilinearProvider(
        echo["vocab_size"], echo["p"], echo["d"], np.random.default_rng(0)
    )
    provider.load_state_dict({k.removeprefix("matcher."): v for k, v in state.items()})
    provider.mark_trained(echo.get("accuracy"))
    provider.freeze()
    return provider


def build_provider(
    config: ExperimentConfig,
    train: Sequence[NewsItem],
    val: Optional[Sequence[NewsItem]] = None,
) -> MatchingProvider:
    """The frozen provider shared by every run of an experiment."""
    settings: ProviderConfig = config.provider
    if settings.kind == ProviderKind.ORACLE:
        return create_provider(settings.kind, magnitude=settings.magnitude)
    if settings.checkpoint is not None:
        logger.info("reusing matcher checkpoint %s", settings.checkpoint)
        return load_matcher(settings.checkpoint)
    return create_provider(
        settings.kind,
        dataset=train,
        epochs=settings.epochs,
        lr=settings.lr,
        d=settings.d,
        batch_size=settings.batch_size,
        seed=config.generator.seed,
        vocab_size=config.model.vocab_size,
        m=config.model.m,
        validation=val,
    )


def pretrain_matcher(config: ExperimentConfig | str | Path, out: Optional[str | Path] = None) -> Path:
    """Pretrain the bilinear provider on the training split and save it."""
    config = _as_config(config)
    train, val, _ = load_splits(config)
    settings = config.provider.model_copy(update={"kind": ProviderKind.BILINEAR, "checkpoint": None})
    provider = build_provider(config.model_copy(update={"provider": settings}), train, val)
    path = Path(out) if out is not None else OutputDir(config.out) / "matcher.ckpt"
    return save_matcher(provider, path)


def _restore_provider(
    config: ExperimentConfig, state: Dict[str, np.ndarray]
) -> MatchingProvider:
    if config.provider.kind == ProviderKind.ORACLE:
        return create_provider(ProviderKind.ORACLE, magnitude=config.provider.magnitude)
    if "matcher.embedding" not in state:
        raise CheckpointError("checkpoint lacks the bilinear matcher tensors")
    vocab_size, d = state["matcher.embedding"].shape
    provider = BilinearProvider(
        vocab_size,
        state["matcher.W_patch"].shape[0],
        d,
        np.random.default_rng(0),
        pad_id=config.model.pad_id,
    )
    provider.freeze()
    provider.mark_trained(None)
    return provider


def load_model(checkpoint: str | Path) -> Tuple[MMCANModel, ExperimentConfig]:
    """
    Rebuild a trained model, matcher included, from a run checkpoint.

    Raises:
        CheckpointError: unreadable file or missing config echo
    """
    state, echo = load_checkpoint(checkpoint)
    if "experiment" not in echo:
        raise CheckpointError(f"'{checkpoint}' is not a model checkpoint")
    try:
        config = ExperimentConfig.model_validate(echo["experiment"])
    except ValidationError as e:
        raise ConfigError.from_validation_error(e, prefix="checkpoint config ")
    model = create_model(
        config.build_model_config(),
        _restore_provider(config, state),
        Variant(echo["variant"]),
        int(echo["seed"]),
    )
    try:
        model.load_state_dict(state)
    except (KeyError, DimensionError) as e:
        raise CheckpointError(f"checkpoint does not fit the model: {e}")
    return model, config


def _data_config(
    echo: ExperimentConfig,
    config: Optional[ExperimentConfig] = None,
    data_seed: Optional[int] = None,
) -> ExperimentConfig:
    """Where a checkpoint is scored: ``config`` or the echo, with ``data_seed`` as generator seed."""
    data = config if config is not None else echo
    if data_seed is not None:
        generator = data.generator.model_copy(update={"seed": data_seed})
        data = data.model_copy(update={"generator": generator})
    return data


class TrainingRun(Runnable):
    """
    One variant trained with one seed; writes run.json, history.csv,
    metrics.csv and model.ckpt through its repository.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        variant: Variant,
        seed: int,
        splits: Splits,
        provider: MatchingProvider,
        repository: RunRepository,
        lambda_kl: Optional[float] = None,
        monitor: Optional[TrainingMonitor] = None,
    ):
        self._config = config
        self._variant = Variant(variant)
        self._seed = seed
        self._splits = splits
        self._provider = provider
        self._repository = repository
        self._lambda_kl = config.train.lambda_kl if lambda_kl is None else lambda_kl
        self._monitor = monitor

    @property
    def id(self) -> str:
        return f"{self._variant.value}/seed_{self._seed}"

    @property
    def name(self) -> str:
        return f"{self._variant.value} (seed {self._seed}, lambda_kl {self._lambda_kl!r})"

    def _echo(self) -> Dict[str, Any]:
        return {
            "experiment": self._config.model_dump(mode="json"),
            "variant": self._variant.value,
            "seed": self._seed,
            "lambda_kl": self._lambda_kl,
        }

    def run(self, **kwargs: Any) -> RunRecord:
        record = RunRecord(
            variant=self._variant,
            seed=self._seed,
            lambda_kl=self._lambda_kl,
            status=RunStatus.EXECUTING,
            started_at=datetime.now(),
            config=self._config.model_dump(mode="json"),
        )
        self._repository.update_run(record)
        logger.info("run %s started", self.name)

        train, val, test = self._splits
        train_config = self._config.train.model_copy(
            update={"variant": self._variant, "seed": self._seed, "lambda_kl": self._lambda_kl}
        )
        try:
            model = create_model(
                self._config.build_model_config(), self._provider, self._variant, self._seed
            )
            result = fit(model, train, val, train_config, self._monitor)
            test_metrics = evaluate_metrics(
                model, test, self._variant, workers=self._config.train.workers
            )
            self._repository.write_history(record, result.history)
            self._repository.write_metrics(record, test_metrics)
            save_checkpoint(self._repository.checkpoint_path(record), model.state_dict(), self._echo())
        except Exception as e:
            record.status = RunStatus.FAILED
            record.error = str(e)
            record.completed_at = datetime.now()
            self._repository.update_run(record)
            logger.error("run %s failed: %s", self.name, e)
            raise

        record.status = RunStatus.COMPLETED
        record.completed_at = datetime.now()
        record.best_epoch = result.best_epoch
        record.epochs_run = len(result.history)
        record.stopped_early = result.stopped_early
        record.val_metrics = result.best_metrics
        record.test_metrics = test_metrics
        self._repository.update_run(record)
        logger.info("run %s finished: test accuracy %.4f", self.name, test_metrics.accuracy)
        return record


def _prepare(config: ExperimentConfig) -> Tuple[Splits, MatchingProvider]:
    splits = load_splits(config)
    return splits, build_provider(config, splits[0], splits[1])


def run(
    config: ExperimentConfig | str | Path,
    monitor: Optional[TrainingMonitor] = None,
) -> List[RunRecord]:
    """Train ``train.variant`` once per seed and write every run's outputs."""
    config = _as_config(config)
    splits, provider = _prepare(config)
    repository = FileRunRepository(OutputDir(config.out))
    runs = [
        TrainingRun(config, config.train.variant, seed, splits, provider, repository, monitor=monitor)
        for seed in config.seeds
    ]
    return gather_runnables(runs, workers=config.train.workers)


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std


ABLATION_COLUMNS = [
    "variant",
    "seeds",
    "accuracy_mean",
    "accuracy_std",
    "f1_fake_mean",
    "f1_fake_std",
    "f1_real_mean",
    "f1_real_std",
]
ABLATION_RUN_COLUMNS = ["variant", "seed", "accuracy", "f1_fake", "f1_real"]


def ablation_suite(
    config: ExperimentConfig | str | Path,
    variants: Optional[Sequence[Variant]] = None,
) -> List[Dict[str, Any]]:
    """
    Every variant over every seed; writes ``ablation.csv`` (mean and std per
    variant) and ``ablation_runs.csv`` (one row per run).
    """
    config = _as_config(config)
    variants = [Variant(v) for v in (variants or list(Variant))]
    splits, provider = _prepare(config)
    output_dir = OutputDir(config.out)
    repository = FileRunRepository(output_dir)
    runs = [
        TrainingRun(config, variant, seed, splits, provider, repository)
        for variant in variants
        for seed in config.seeds
    ]
    records: List[RunRecord] = gather_runnables(runs, workers=config.train.workers)

    run_rows = [
        {
            "variant": r.variant.value,
            "seed": r.seed,
            "accuracy": r.test_metrics.accuracy,
            "f1_fake": r.test_metrics.f1_fake,
            "f1_real": r.test_metrics.f1_real,
        }
        for r in records
    ]
    rows = []
    for variant in variants:
        group = [row for row in run_rows if row["variant"] == variant.value]
        row: Dict[str, Any] = {"variant": variant.value, "seeds": len(group)}
        for metric in ("accuracy", "f1_fake", "f1_real"):
            row[f"{metric}_mean"], row[f"{metric}_std"] = _mean_std([g[metric] for g in group])
        rows.append(row)

    write_csv(output_dir / "ablation_runs.csv", ABLATION_RUN_COLUMNS, run_rows)
    write_csv(output_dir / "ablation.csv", ABLATION_COLUMNS, rows)
    logger.info("ablation suite finished: %d runs", len(records))
    return rows


SWEEP_COLUMNS = ["lambda", "seeds", "accuracy", "avg_f1"]
SWEEP_RUN_COLUMNS = ["lambda", "seed", "accuracy", "avg_f1"]


def sweep_trend(rows: Sequence[Dict[str, Any]], key: str = "accuracy") -> bool:
    """True when ``key`` peaks strictly inside the grid, rising before and falling after."""
    values = [row[key] for row in rows]
    if len(values) < 3:
        return False
    peak = int(np.argmax(values))
    if not 0 < peak < len(values) - 1:
        return False
    rising = all(a <= b for a, b in zip(values[:peak], values[1 : peak + 1]))
    falling = all(a >= b for a, b in zip(values[peak:], values[peak + 1 :]))
    return rising and falling


def lambda_sweep(
    config: ExperimentConfig | str | Path,
    values: Optional[Sequence[float]] = None,
) -> List[Dict[str, Any]]:
    """
    The full model once per lambda_KL value and seed.

    Writes ``sweep.csv`` (one row per value, ascending) and
    ``sweep_runs.csv`` (one row per value and seed).

    Raises:
        ValueError: empty grid or a non-positive value
    """
    config = _as_config(config)
    values = sorted(float(v) for v in (values if values is not None else config.lambdas))
    if not values or any(v <= 0 for v in values):
        raise ValueError(f"lambda values must be positive and non-empty, got {values}")

    splits, provider = _prepare(config)
    output_dir = OutputDir(config.out)
    runs = []
    for value in values:
        repository = FileRunRepository(output_dir.subdir(f"lambda_{value!r}"))
        runs.extend(
            TrainingRun(config, Variant.FULL, seed, splits, provider, repository, lambda_kl=value)
            for seed in config.seeds
        )
    records: List[RunRecord] = gather_runnables(runs, workers=config.train.workers)

    run_rows = [
        {
            "lambda": r.lambda_kl,
            "seed": r.seed,
            "accuracy": r.test_metrics.accuracy,
            "avg_f1": r.test_metrics.avg_f1,
        }
        for r in records
    ]
    rows = []
    for value in values:
        group = [row for row in run_rows if row["lambda"] == value]
        rows.append(
            {
                "lambda": value,
                "seeds": len(group),
                "accuracy": float(np.mean([g["accuracy"] for g in group])),
                "avg_f1": float(np.mean([g["avg_f1"] for g in group])),
            }
        )

    write_csv(output_dir / "sweep_runs.csv", SWEEP_RUN_COLUMNS, run_rows)
    write_csv(output_dir / "sweep.csv", SWEEP_COLUMNS, rows)
    if not sweep_trend(rows):
        logger.warning("sweep accuracy does not rise then fall over lambda_KL")
    return rows


def attention_mask(weights) -> np.ndarray:
    """Per row: 255 where a weight is strictly above the row median, else 76."""
    weights = np.asarray(weights, dtype=np.float64)
    median = np.median(weights, axis=-1, keepdims=True)
    return np.where(weights > median, MASK_HIGH, MASK_LOW).astype(np.int64)


def _find_item(item_id: int, items: Sequence[NewsItem]) -> NewsItem:
    for item in items:
        if item.id == item_id:
            return item
    raise ValueError(f"unknown item id {item_id}")


def dump_attention(
    checkpoint: str | Path,
    item_id: int,
    out: str | Path,
    network: str = "text",
    items: Optional[Sequence[NewsItem]] = None,
    config: Optional[ExperimentConfig] = None,
    data_seed: Optional[int] = None,
) -> List[Path]:
    """
    Write one item's co-attention weights and their median-threshold masks.

    For the text network each row is a (non-pad) query token and each column
    a patch; for the vision network rows are patches and columns tokens.
    Files: ``head_<i>.csv``, ``mask_<i>.csv`` per head, ``mean.csv`` and
    ``mean_mask.csv`` for the head average.

    Items come from ``items``, else from the splits of ``config`` (default:
    the checkpoint's own config), regenerated with ``data_seed`` when given.

    Raises:
        ValueError: unknown item id, unknown network, or a network the
            checkpoint's variant does not use
    """
    if network not in ("text", "vision"):
        raise ValueError(f"network must be 'text' or 'vision', got '{network}'")
    model, echo = load_model(checkpoint)
    config = _data_config(echo, config, data_seed)
    unused = Variant.VISION_ONLY if network == "text" else Variant.TEXT_ONLY
    if model.variant == unused:
        raise ValueError(f"variant '{model.variant.value}' has no {network}-centered network")
    if items is None:
        items = [item for split in load_splits(config) for item in split]
    item = _find_item(item_id, items)

    batch = NewsBatch([item], m=echo.model.m, pad_id=echo.model.pad_id)
    gate_open = model.variant == Variant.WITHOUT_MATCH
    with no_grad():
        h_text, h_vision, text_mask = encode_batch(batch, model)
        hm = None if gate_open else model.matcher(batch)
        net = model.text_network if network == "text" else model.vision_network
        _, weights = forward_network(
            h_text, h_vision, hm, net, text_mask=text_mask,
            gate_open=gate_open, return_attention=True,
        )

    real = np.flatnonzero(text_mask[0])
    grids = [w[0] for w in weights]
    if network == "text":
        grids = [g[real] for g in grids]
        row_ids, row_key, col_key = real, "token", "patch"
    else:
        row_ids, row_key, col_key = np.arange(grids[0].shape[0]), "patch", "token"
    columns = [row_key] + [f"{col_key}_{j}" for j in range(grids[0].shape[1])]

    def _write(name: str, grid: np.ndarray) -> Path:
        rows = [
            {row_key: int(r), **{columns[j + 1]: v.item() for j, v in enumerate(line)}}
            for r, line in zip(row_ids, grid)
        ]
        return write_csv(Path(out) / name, columns, rows)

    written = []
    for head, grid in enumerate(grids):
        written.append(_write(f"head_{head}.csv", grid))
        written.append(_write(f"mask_{head}.csv", attention_mask(grid)))
    mean = np.mean(grids, axis=0)
    written.append(_write("mean.csv", mean))
    written.append(_write("mean_mask.csv", attention_mask(mean)))
    logger.info("attention of item %d (%s network) written to %s", item_id, network, out)
    return written


def evaluate_checkpoint(
    checkpoint: str | Path,
    out: Optional[str | Path] = None,
    split: str = "test",
    items: Optional[Sequence[NewsItem]] = None,
    config: Optional[ExperimentConfig] = None,
    data_seed: Optional[int] = None,
) -> Metrics:
    """
    Score a run checkpoint on a split; writes ``<out>/metrics.csv`` when ``out`` is given.

    The split is taken from ``config`` when given, else from the checkpoint's
    own config; ``data_seed`` regenerates it with another generator seed.
    """
    names = {"train": 0, "val": 1, "test": 2}
    if split not in names:
        raise ValueError(f"split must be one of {sorted(names)}, got '{split}'")
    model, echo = load_model(checkpoint)
    if items is None:
        items = load_splits(_data_config(echo, config, data_seed))[names[split]]
    metrics = evaluate_metrics(model, items, workers=echo.train.workers)
    if out is not None:
        write_csv(Path(out) / "metrics.csv", METRICS_COLUMNS, [metrics.model_dump()])
    return metrics
