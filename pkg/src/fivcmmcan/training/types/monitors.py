"""
Training progress monitor.

The fit loop reports lifecycle events to a ``TrainingMonitor``, which keeps
the epoch history and forwards every event to an optional callback (the CLI
uses it to render progress). A failing callback is logged and ignored so
training is never interrupted by a display problem.
"""

import logging
from typing import Callable, List, Optional

from fivcmmcan.training.types.base import EpochRecord, TrainingEvent

logger = logging.getLogger(__name__)

EventCallback = Callable[[TrainingEvent, Optional[EpochRecord]], None]


class TrainingMonitor(object):
    """
    Collects epoch records and relays training events.

    Example:
        >>> def on_event(event, record):
        ...     print(event.value, record)
        >>> monitor = TrainingMonitor(on_event=on_event)
        >>> result = fit(model, train, val, config, monitor=monitor)
        >>> monitor.best_epoch
    """

    def __init__(self, on_event: Optional[EventCallback] = None):
        self._on_event = on_event
        self._history: List[EpochRecord] = []
        self._best: Optional[EpochRecord] = None
        self._stopped_early = False
        self._finished = False

    @property
    def history(self) -> List[EpochRecord]:
        return list(self._history)

    @property
    def best(self) -> Optional[EpochRecord]:
        return self._best

    @property
    def best_epoch(self) -> Optional[int]:
        return self._best.epoch if self._best else None

    @property
    def stopped_early(self) -> bool:
        return self._stopped_early

    @property
    def finished(self) -> bool:
        return self._finished

    def __call__(self, event: TrainingEvent, record: Optional[EpochRecord] = None) -> None:
        if event == TrainingEvent.START:
            self._history.clear()
            self._best = None
            self._stopped_early = False
            self._finished = False
        elif event == TrainingEvent.EPOCH and record is not None:
            self._history.append(record)
            if self._best is None or record.val_accuracy > self._best.val_accuracy:
                self._best = record
        elif event == TrainingEvent.EARLY_STOP:
            self._stopped_early = True
        elif event == TrainingEvent.FINISH:
            self._finished = True

        if self._on_event is None:
            return
        try:
            self._on_event(event, record)
        except Exception as e:
            logger.warning("training event callback failed on %s: %s", event.value, e)
