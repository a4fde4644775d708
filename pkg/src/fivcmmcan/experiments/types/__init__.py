__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "SPLIT_FILES",
    "ConfigError",
    "ProviderConfig",
    "ExperimentConfig",
    "load_config",
    "RunStatus",
    "RunRecord",
    "RunRepository",
    "FileRunRepository",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "write_csv",
    "read_csv",
]

from fivcmmcan.experiments.types.base import (
    DEFAULT_LAMBDA_GRID,
    SPLIT_FILES,
    ConfigError,
    ProviderConfig,
    ExperimentConfig,
    load_config,
)
from fivcmmcan.experiments.types.repositories import (
    RunStatus,
    RunRecord,
    RunRepository,
    CheckpointError,
    save_checkpoint,
    load_checkpoint,
    write_csv,
    read_csv,
)
from fivcmmcan.experiments.types.repositories.files import FileRunRepository
