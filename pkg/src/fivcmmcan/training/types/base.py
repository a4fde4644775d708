"""
Training types.

    - TrainConfig: optimizer, objective and early-stopping settings
    - Metrics: accuracy and per-class precision/recall/F1 from confusion counts
    - EpochRecord: one line of the training history
    - TrainingEvent: lifecycle events emitted to a TrainingMonitor
    - TrainingError: NaN losses or gradients, empty datasets
"""

from enum import Enum

from pydantic import BaseModel, Field, computed_field

from fivcmmcan.models import Variant


class TrainingError(RuntimeError):
    """Training cannot proceed (empty split, NaN loss or gradient)."""


class TrainingEvent(str, Enum):
    """
    Training lifecycle events.

    Attributes:
        START: before the first epoch
        EPOCH: after each epoch's validation pass
        EARLY_STOP: patience exhausted
        FINISH: best checkpoint restored
    """

    START = "start"
    EPOCH = "epoch"
    EARLY_STOP = "early_stop"
    FINISH = "finish"


class TrainConfig(BaseModel):
    """Training hyperparameters."""

    model_config = {"extra": "forbid"}

    epochs: int = Field(default=80, gt=0, description="Maximum number of epochs")
    batch_size: int = Field(default=64, gt=0, description="Mini-batch size")
    lr: float = Field(default=0.001, gt=0.0, description="AdamW learning rate")
    weight_decay: float = Field(default=0.01, ge=0.0, description="Decoupled weight decay")
    lambda_kl: float = Field(default=0.01, ge=0.0, description="Weight of the mutual KL terms")
    dropout: float = Field(default=0.4, ge=0.0, lt=1.0, description="Dropout rate")
    patience: int = Field(
        default=10, ge=0, description="Non-improving epochs tolerated before stopping"
    )
    seed: int = Field(default=0, description="Seed for initialization, shuffling, dropout")
    variant: Variant = Field(default=Variant.FULL, description="Model variant")
    detach_peer: bool = Field(
        default=False, description="Treat the imitated network as a constant in the KL terms"
    )
    workers: int = Field(default=1, ge=1, description="Threads used by evaluation")


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


class Metrics(BaseModel):
    """
    Binary classification metrics, class "fake" (label 1) as positive.

    Every rate is derived from the integer confusion counts; a zero
    denominator yields 0.
    """

    tp: int = Field(default=0, ge=0, description="Fake items predicted fake")
    fp: int = Field(default=0, ge=0, description="Real items predicted fake")
    fn: int = Field(default=0, ge=0, description="Fake items predicted real")
    tn: int = Field(default=0, ge=0, description="Real items predicted real")

    @computed_field
    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @computed_field
    @property
    def accuracy(self) -> float:
        return _ratio(self.tp + self.tn, self.total)

    @computed_field
    @property
    def precision_fake(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @computed_field
    @property
    def recall_fake(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @computed_field
    @property
    def f1_fake(self) -> float:
        return _ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

    @computed_field
    @property
    def precision_real(self) -> float:
        return _ratio(self.tn, self.tn + self.fn)

    @computed_field
    @property
    def recall_real(self) -> float:
        return _ratio(self.tn, self.tn + self.fp)

    @computed_field
    @property
    def f1_real(self) -> float:
        return _ratio(2 * self.tn, 2 * self.tn + self.fn + self.fp)

    @property
    def avg_f1(self) -> float:
        """Mean of the fake and real F1 scores."""
        return (self.f1_fake + self.f1_real) / 2.0

    def __add__(self, other: "Metrics") -> "Metrics":
        return Metrics(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


class EpochRecord(BaseModel):
    """Train loss and validation metrics after one epoch."""

    epoch: int = Field(ge=1, description="1-based epoch number")
    train_loss: float = Field(description="Mean training loss over the epoch")
    val_accuracy: float = Field(description="Validation accuracy")
    val_f1_fake: float = Field(description="Validation F1 of class fake")
    val_f1_real: float = Field(description="Validation F1 of class real")
