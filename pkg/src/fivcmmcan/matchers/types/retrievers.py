from abc import ABC, abstractmethod
from typing import Any, Callable, List, Optional

from fivcmmcan.matchers.types.base import MatchingProvider


class BaseProviderCreator(ABC):
    """
    Base class for matching provider creators.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        raise NotImplementedError()

    @property
    @abstractmethod
    def description(self) -> str:
        raise NotImplementedError()

    def __str__(self):
        return self.name

    def __repr__(self):
        return self.name

    @abstractmethod
    def __call__(self, *args, **kwargs) -> MatchingProvider:
        """Create and return a matching provider."""
        raise NotImplementedError()


class FunctionProviderCreator(BaseProviderCreator):
    """
    Provider creator that wraps a function.
    """

    def __init__(self, name: str, func: Callable[..., MatchingProvider]):
        self._name = name
        self._func = func

    @property
    def name(self) -> str:
        return self._name

    @property
    def description(self) -> str:
        return self._func.__doc__ or ""

    def __call__(self, *args, **kwargs) -> MatchingProvider:
        return self._func(*args, **kwargs)


class ProvidersRetriever(object):
    """
    A registry of matching provider creators, keyed by kind name.
    """

    def __init__(self) -> None:
        self.creators: dict[str, BaseProviderCreator] = {}

    def add(self, creator: BaseProviderCreator):
        if creator.name in self.creators:
            raise RuntimeError(f"Provider creator {creator.name} already exists")

        self.creators[creator.name] = creator

    def add_batch(self, creators: List[BaseProviderCreator]):
        for creator in creators:
            self.add(creator)

    def get(self, name: str) -> Optional[BaseProviderCreator]:
        return self.creators.get(name)

    def get_all(self) -> List[BaseProviderCreator]:
        return list(self.creators.values())


def provider_creator(name: str) -> Callable[[Callable[..., Any]], BaseProviderCreator]:
    """
    Decorator turning a factory function into a provider creator.

    Usage:
        @provider_creator("oracle")
        def create_oracle(**kwargs):
            return OracleProvider()

        retriever = ProvidersRetriever()
        retriever.add(create_oracle)
    """

    def _wrapper(func: Callable[..., MatchingProvider]) -> BaseProviderCreator:
        return FunctionProviderCreator(name or func.__name__, func)

    return _wrapper
