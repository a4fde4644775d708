__all__ = [
    "DefaultKwargs",
    "LazyValue",
    "OutputDir",
    "Runnable",
    "gather_runnables",
]

from fivcmmcan.utils.types import (
    DefaultKwargs,
    LazyValue,
    OutputDir,
    Runnable,
    gather_runnables,
)
