"""
Training loop, early stopping and evaluation.

``fit`` runs AdamW over the variant's trainable parameters, shuffling the
training split each epoch with a generator derived from (seed, epoch). After
every epoch the validation split is scored; training stops once the number
of consecutive epochs without a strictly higher validation accuracy exceeds
``patience``, and the parameters of the best epoch are restored.

Example:
    >>> from fivcmmcan.training import TrainConfig, fit, evaluate_metrics
    >>> result = fit(model, train, val, TrainConfig(epochs=20))
    >>> evaluate_metrics(result.model, test).accuracy
"""

__all__ = [
    "TrainConfig",
    "Metrics",
    "EpochRecord",
    "TrainingEvent",
    "TrainingError",
    "TrainingMonitor",
    "AdamW",
    "AdamWState",
    "adamw_step",
    "FitResult",
    "confusion_metrics",
    "evaluate_metrics",
    "fit",
]

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from fivcmmcan.datasets import NewsItem, iter_batches
from fivcmmcan.models import MMCANModel, Variant, forward_variant, infer
from fivcmmcan.tensors import backward
from fivcmmcan.training.types import (
    TrainConfig,
    Metrics,
    EpochRecord,
    TrainingEvent,
    TrainingError,
    TrainingMonitor,
    AdamW,
    AdamWState,
    adamw_step,
)

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256


class FitResult(object):
    """Trained model (best validation epoch restored) and its history."""

    __slots__ = ("model", "history", "best_epoch", "best_metrics", "stopped_early")

    def __init__(
        self,
        model: MMCANModel,
        history: List[EpochRecord],
        best_epoch: int,
        best_metrics: Metrics,
        stopped_early: bool,
    ):
        self.model = model
        self.history = history
        self.best_epoch = best_epoch
        self.best_metrics = best_metrics
        self.stopped_early = stopped_early


def confusion_metrics(predictions, labels) -> Metrics:
    """Metrics from predicted and true labels (1 = fake)."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ValueError(f"{predictions.shape} predictions for {labels.shape} labels")
    return Metrics(
        tp=int(np.sum((predictions == 1) & (labels == 1))),
        fp=int(np.sum((predictions == 1) & (labels == 0))),
        fn=int(np.sum((predictions == 0) & (labels == 1))),
        tn=int(np.sum((predictions == 0) & (labels == 0))),
    )


def evaluate_metrics(
    model: MMCANModel,
    dataset: Sequence[NewsItem],
    variant: Optional[Variant | str] = None,
    workers: int = 1,
    batch_size: int = EVAL_BATCH_SIZE,
) -> Metrics:
    """
    Score ``dataset`` in eval mode.

    Batches may be spread over ``workers`` threads; confusion counts are
    summed, so the result does not depend on item order.
    """
    chunks = [dataset[i : i + batch_size] for i in range(0, len(dataset), batch_size)]

    def _score(chunk: Sequence[NewsItem]) -> Metrics:
        _, predictions = infer(chunk, model, variant)
        return confusion_metrics(predictions, [item.label for item in chunk])

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_score, chunks))
    else:
        parts = [_score(chunk) for chunk in chunks]
    return sum(parts, Metrics())


def _train_epoch(
    model: MMCANModel,
    optimizer: AdamW,
    train_set: Sequence[NewsItem],
    config: TrainConfig,
    epoch: int,
) -> float:
    shuffle = np.random.default_rng([config.seed, epoch])
    total = 0.0
    for batch in iter_batches(train_set, config.batch_size, m=model.config.m, rng=shuffle):
        optimizer.zero_grads()
        out = forward_variant(
            batch,
            model,
            train=True,
            variant=config.variant,
            lambda_kl=config.lambda_kl,
            detach_peer=config.detach_peer,
        )
        loss = out.loss.item()
        if not math.isfinite(loss):
            raise TrainingError(f"loss is {loss} at epoch {epoch}")
        backward(out.loss)
        optimizer.step()
        total += loss * len(batch)
        logger.debug("epoch %d batch of %d: loss %.6f", epoch, len(batch), loss)
    return total / len(train_set)


def fit(
    model: MMCANModel,
    train_set: Sequence[NewsItem],
    val_set: Sequence[NewsItem],
    config: Optional[TrainConfig] = None,
    monitor: Optional[TrainingMonitor] = None,
) -> FitResult:
    """
    Train ``model`` with early stopping on validation accuracy.

    The matching provider stays frozen; only the variant's trainable
    parameters are updated.

    Raises:
        TrainingError: empty train or validation split, NaN loss or gradient
    """
    config = config or TrainConfig()
    monitor = monitor or TrainingMonitor()
    if not train_set:
        raise TrainingError("training split is empty")
    if not val_set:
        raise TrainingError("validation split is empty")

    optimizer = AdamW(
        model.trainable_parameters(config.variant),
        lr=config.lr,
        weight_decay=config.weight_decay,
    )
    history: List[EpochRecord] = []
    best_accuracy = -1.0
    best_epoch = 0
    best_metrics = Metrics()
    best_state: Dict[str, np.ndarray] = model.state_dict()
    stale = 0
    stopped_early = False

    monitor(TrainingEvent.START)
    logger.info(
        "training %s (seed %d): %d train / %d val items, up to %d epochs",
        config.variant.value, config.seed, len(train_set), len(val_set), config.epochs,
    )
    for epoch in range(1, config.epochs + 1):
        train_loss = _train_epoch(model, optimizer, train_set, config, epoch)
        metrics = evaluate_metrics(model, val_set, config.variant, config.workers)
        record = EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            val_accuracy=metrics.accuracy,
            val_f1_fake=metrics.f1_fake,
            val_f1_real=metrics.f1_real,
        )
        history.append(record)
        monitor(TrainingEvent.EPOCH, record)
        logger.info(
            "epoch %d: train loss %.6f, val accuracy %.4f",
            epoch, train_loss, metrics.accuracy,
        )

        if metrics.accuracy > best_accuracy:
            best_accuracy, best_epoch, best_metrics = metrics.accuracy, epoch, metrics
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                stopped_early = True
                logger.info(
                    "early stop after epoch %d: no improvement since epoch %d",
                    epoch, best_epoch,
                )
                monitor(TrainingEvent.EARLY_STOP, record)
                break

    model.load_state_dict(best_state)
    monitor(TrainingEvent.FINISH, history[best_epoch - 1])
    return FitResult(model, history, best_epoch, best_metrics, stopped_early)
