__all__ = [
    "RunStatus",
    "RunRecord",
    "RunRepository",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "write_csv",
    "read_csv",
]

from fivcmmcan.experiments.types.repositories.base import (
    RunStatus,
    RunRecord,
    RunRepository,
)
from fivcmmcan.experiments.types.repositories.checkpoints import (
    CheckpointError,
    save_checkpoint,
    load_checkpoint,
)
from fivcmmcan.experiments.types.repositories.tables import write_csv, read_csv
