import logging
import time
from collections import defaultdict
from functools import wraps
from typing import Dict, List

import numpy as np

logger = logging.getLogger(__name__)


class BatchTimer:
    """Collects wall-clock durations of traced calls, grouped by name."""

    def __init__(self):
        self.durations: Dict[str, List[float]] = defaultdict(list)

    def record(self, name: str, seconds: float):
        self.durations[name].append(seconds)

    def mean(self, name: str) -> float:
        values = self.durations.get(name)
        return float(np.mean(values)) if values else 0.0

    def count(self, name: str) -> int:
        return len(self.durations.get(name, ()))


def trace(timer: BatchTimer, name: str):
    """Record the wall time of every call of the wrapped function into `timer`."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            result = func(*args, **kwargs)
            elapsed = time.perf_counter() - start
            timer.record(name, elapsed)
            logger.debug("%s took %.6fs", name, elapsed)
            return result
        return wrapper
    return decorator
