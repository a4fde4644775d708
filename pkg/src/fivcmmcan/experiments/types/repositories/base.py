"""
Run records and the repository interface.

    - RunStatus: lifecycle of one training run
    - RunRecord: config echo, timings, outcome and metrics of one run
    - RunRepository: where run records, tables and checkpoints live
"""

from abc import ABC, abstractmethod
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, computed_field

from fivcmmcan.models import Variant
from fivcmmcan.training import EpochRecord, Metrics


class RunStatus(str, Enum):
    """
    Run status.

    Attributes:
        PENDING: created, not started
        EXECUTING: training or evaluating
        COMPLETED: every output written
        FAILED: stopped with an error
    """

    PENDING = "pending"
    EXECUTING = "executing"
    COMPLETED = "completed"
    FAILED = "failed"


class RunRecord(BaseModel):
    """One training run of one variant with one seed."""

    variant: Variant = Field(description="Model variant")
    seed: int = Field(description="Run seed")
    lambda_kl: float = Field(description="Weight of the mutual KL terms")
    status: RunStatus = Field(default=RunStatus.PENDING, description="Run status")
    started_at: Optional[datetime] = Field(default=None, description="Start timestamp")
    completed_at: Optional[datetime] = Field(default=None, description="End timestamp")
    error: Optional[str] = Field(default=None, description="Error message of a failed run")
    best_epoch: Optional[int] = Field(default=None, description="Epoch restored at the end")
    epochs_run: int = Field(default=0, description="Epochs actually trained")
    stopped_early: bool = Field(default=False, description="Whether patience ran out")
    val_metrics: Optional[Metrics] = Field(default=None, description="Best validation metrics")
    test_metrics: Optional[Metrics] = Field(default=None, description="Test metrics")
    config: Dict[str, Any] = Field(default_factory=dict, description="Experiment config echo")

    @computed_field
    @property
    def id(self) -> str:
        return f"{self.variant.value}/seed_{self.seed}"

    @computed_field
    @property
    def duration(self) -> Optional[float]:
        """Run duration in seconds."""
        if self.started_at and self.completed_at:
            return (self.completed_at - self.started_at).total_seconds()
        return None

    @computed_field
    @property
    def is_completed(self) -> bool:
        return self.status in (RunStatus.COMPLETED, RunStatus.FAILED)


class RunRepository(ABC):
    """
    Storage for run outputs.

    Methods:
        update_run: create or update a run record
        get_run: a run record by variant and seed
        list_runs: every run record
        write_metrics: the one-row metrics table of a run
        write_history: the per-epoch history table of a run
        checkpoint_path: where a run's checkpoint goes
    """

    @abstractmethod
    def update_run(self, record: RunRecord) -> None:
        """Create or update a run record."""
        ...

    @abstractmethod
    def get_run(self, variant: Variant | str, seed: int) -> Optional[RunRecord]:
        """Retrieve a run record."""
        ...

    @abstractmethod
    def list_runs(self) -> List[RunRecord]:
        """List every run record."""
        ...

    @abstractmethod
    def write_metrics(self, record: RunRecord, metrics: Metrics) -> Path:
        """Write a run's metrics table."""
        ...

    @abstractmethod
    def write_history(self, record: RunRecord, history: List[EpochRecord]) -> Path:
        """Write a run's training history."""
        ...

    @abstractmethod
    def checkpoint_path(self, record: RunRecord) -> Path:
        """Path of a run's checkpoint."""
        ...
