"""
File-based run repository.

Storage Structure:
    /<output_dir>/
    └── <variant>/
        └── seed_<seed>/
            ├── run.json        # RunRecord
            ├── metrics.csv     # one row of test metrics
            ├── history.csv     # one row per epoch
            └── model.ckpt      # binary checkpoint
"""

import json
import logging
from pathlib import Path
from typing import List, Optional

from fivcmmcan.experiments.types.repositories import (
    RunRecord,
    RunRepository,
    write_csv,
)
from fivcmmcan.models import Variant
from fivcmmcan.training import EpochRecord, Metrics
from fivcmmcan.utils import OutputDir

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "accuracy",
    "precision_fake",
    "recall_fake",
    "f1_fake",
    "precision_real",
    "recall_real",
    "f1_real",
    "tp",
    "fp",
    "fn",
    "tn",
]

HISTORY_COLUMNS = ["epoch", "train_loss", "val_accuracy", "val_f1_fake", "val_f1_real"]


class FileRunRepository(RunRepository):
    """Run outputs under ``<output_dir>/<variant>/seed_<seed>/``."""

    def __init__(self, output_dir: Optional[OutputDir] = None):
        self.output_dir = output_dir or OutputDir().subdir("runs")
        self.base_path = Path(str(self.output_dir))
        self.base_path.mkdir(parents=True, exist_ok=True)

    def _get_run_dir(self, variant: Variant | str, seed: int) -> Path:
        return self.base_path / Variant(variant).value / f"seed_{seed}"

    def _get_run_file(self, variant: Variant | str, seed: int) -> Path:
        return self._get_run_dir(variant, seed) / "run.json"

    def update_run(self, record: RunRecord) -> None:
        run_dir = self._get_run_dir(record.variant, record.seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        with open(run_dir / "run.json", "w", encoding="utf-8") as f:
            json.dump(record.model_dump(mode="json"), f, indent=2, ensure_ascii=False)

    def get_run(self, variant: Variant | str, seed: int) -> Optional[RunRecord]:
        run_file = self._get_run_file(variant, seed)
        if not run_file.exists():
            return None
        try:
            with open(run_file, "r", encoding="utf-8") as f:
                data = json.load(f)
            for computed in ("id", "duration", "is_completed"):
                data.pop(computed, None)
            return RunRecord.model_validate(data)
        except (json.JSONDecodeError, ValueError) as e:
            logger.warning("cannot load run %s/seed_%s: %s", variant, seed, e)
            return None

    def list_runs(self) -> List[RunRecord]:
        records = []
        for run_file in sorted(self.base_path.glob("*/seed_*/run.json")):
            seed = int(run_file.parent.name.removeprefix("seed_"))
            record = self.get_run(run_file.parent.parent.name, seed)
            if record is not None:
                records.append(record)
        return records

    def write_metrics(self, record: RunRecord, metrics: Metrics) -> Path:
        row = metrics.model_dump()
        return write_csv(
            self._get_run_dir(record.variant, record.seed) / "metrics.csv",
            METRICS_COLUMNS,
            [row],
        )

    def write_history(self, record: RunRecord, history: List[EpochRecord]) -> Path:
        return write_csv(
            self._get_run_dir(record.variant, record.seed) / "history.csv",
            HISTORY_COLUMNS,
            [epoch.model_dump() for epoch in history],
        )

    def checkpoint_path(self, record: RunRecord) -> Path:
        return self._get_run_dir(record.variant, record.seed) / "model.ckpt"
