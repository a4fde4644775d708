"""
Types module for fivcmmcan utils.

This module provides small utility types shared by the experiment stack:
- OutputDir: Output directory handle rooting every run artifact
- LazyValue: Lazy-evaluated transparent proxy for deferred defaults
- DefaultKwargs: Keyword defaults merged into partial option dicts
- Runnable: Abstract base class for units of work with sync and async execution
"""

__all__ = [
    "DefaultKwargs",
    "OutputDir",
    "Runnable",
    "LazyValue",
    "gather_runnables",
]

from .arguments import DefaultKwargs
from .directories import OutputDir
from .runnables import Runnable, gather_runnables
from .variables import LazyValue
