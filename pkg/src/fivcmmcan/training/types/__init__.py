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
]

from fivcmmcan.training.types.base import (
    TrainConfig,
    Metrics,
    EpochRecord,
    TrainingEvent,
    TrainingError,
)
from fivcmmcan.training.types.monitors import TrainingMonitor
from fivcmmcan.training.types.optimizers import AdamW, AdamWState, adamw_step
