"""
Runnable abstract base class for fivcmmcan utilities.

This module defines the Runnable abstract base class, the unit of work the
experiment harness schedules (one training run per seed and variant), and
``gather_runnables`` which executes a batch of them with bounded parallelism.
"""

import asyncio
from abc import ABC, abstractmethod
from typing import Any, List, Sequence


class Runnable(ABC):
    """
    Abstract base class for runnable objects that support sync and async execution.

    Subclasses implement ``run()``; ``run_async()`` defaults to executing
    ``run()`` in a worker thread so independent runs can overlap.

    Abstract Properties:
        id: Unique identifier for the runnable
        name: Human-readable name for the runnable

    Example:
        >>> class MyRunnable(Runnable):
        ...     @property
        ...     def id(self) -> str:
        ...         return "my-runnable"
        ...
        ...     @property
        ...     def name(self) -> str:
        ...         return "MyRunnable"
        ...
        ...     def run(self, **kwargs):
        ...         return "sync result"
        ...
        >>> runnable = MyRunnable()
        >>> result = runnable.run()
        >>> async_result = await runnable.run_async()
    """

    @property
    @abstractmethod
    def id(self) -> str:
        """
        Unique identifier for the runnable.
        """

    @property
    @abstractmethod
    def name(self) -> str:
        """
        Name of the runnable.
        """

    @abstractmethod
    def run(self, **kwargs: Any) -> Any:
        """
        Execute the runnable synchronously.

        Args:
            **kwargs: Keyword arguments to pass to the runnable

        Returns:
            The result of the synchronous execution
        """

    async def run_async(self, **kwargs: Any) -> Any:
        """
        Execute the runnable in a worker thread.

        Args:
            **kwargs: Keyword arguments to pass to ``run()``

        Returns:
            The result of ``run()``
        """
        return await asyncio.to_thread(self.run, **kwargs)

    def __call__(self, **kwargs: Any) -> Any:
        return self.run(**kwargs)


def gather_runnables(runnables: Sequence[Runnable], workers: int = 1) -> List[Any]:
    """Run every runnable, at most ``workers`` at a time, keeping input order.

    With a single worker the runnables execute sequentially in the calling
    thread.
    """
    if workers <= 1:
        return [r.run() for r in runnables]

    async def _gather():
        semaphore = asyncio.Semaphore(workers)

        async def _one(r: Runnable):
            async with semaphore:
                return await r.run_async()

        return await asyncio.gather(*(_one(r) for r in runnables))

    return list(asyncio.run(_gather()))
