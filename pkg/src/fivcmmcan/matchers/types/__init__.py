__all__ = [
    "MATCH_DIM",
    "MatchRepresentation",
    "MatchingProvider",
    "ProviderKind",
    "ProviderNotTrainedError",
    "OracleProvider",
    "BilinearProvider",
    "ProvidersRetriever",
    "BaseProviderCreator",
    "provider_creator",
]

from .base import (
    MATCH_DIM,
    MatchRepresentation,
    MatchingProvider,
    ProviderKind,
    ProviderNotTrainedError,
)
from .providers import OracleProvider, BilinearProvider
from .retrievers import ProvidersRetriever, BaseProviderCreator, provider_creator
