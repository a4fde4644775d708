__all__ = [
    "NewsItem",
    "NewsBatch",
    "GeneratorConfig",
    "DatasetFormatError",
]

from .base import NewsItem, NewsBatch, GeneratorConfig, DatasetFormatError
