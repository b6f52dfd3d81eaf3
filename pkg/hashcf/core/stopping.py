import math
from typing import Callable, Dict, Optional

import torch

from .errors import TrainingDivergedError


class StopCondition:
    def __init__(self, name: str, condition: Callable[[torch.Tensor], bool]):
        self.name = name
        self.condition = condition
        self.enabled = True

    def should_stop(self, tensor: torch.Tensor) -> bool:
        if not self.enabled:
            return False
        return bool(self.condition(tensor))


def has_nan(tensor: torch.Tensor) -> bool:
    return bool(torch.isnan(tensor).any())


def has_inf(tensor: torch.Tensor) -> bool:
    return bool(torch.isinf(tensor).any())


class DivergenceGuard:
    """Named conditions checked against every batch loss; any hit aborts training."""

    def __init__(self):
        self.conditions: Dict[str, StopCondition] = {}
        self.add_condition("nan", has_nan)
        self.add_condition("inf", has_inf)

    def add_condition(self, name: str, condition: Callable[[torch.Tensor], bool]):
        self.conditions[name] = StopCondition(name, condition)

    def disable(self, name: str):
        if name in self.conditions:
            self.conditions[name].enabled = False

    def check(self, loss: torch.Tensor, epoch: int, iteration: int):
        for condition in self.conditions.values():
            if condition.should_stop(loss):
                raise TrainingDivergedError(
                    f"loss hit '{condition.name}' at epoch {epoch}, iteration {iteration}"
                )


class EarlyStopping:
    """
    Tracks the best validation checkpoint.

    A validation round improves on the best one if its NDCG is higher, or if the
    NDCG ties and the validation loss is lower. Training stops after `patience`
    rounds without improvement; `patience=None` never stops.
    """

    def __init__(self, patience: Optional[int], tolerance: float = 1e-12):
        self.patience = patience
        self.tolerance = tolerance
        self.best_ndcg = -math.inf
        self.best_loss = math.inf
        self.best_epoch: Optional[int] = None
        self.stale_rounds = 0

    def update(self, epoch: int, ndcg: float, loss: float) -> bool:
        """Register a validation round; returns True when it is the new best."""
        improved = ndcg > self.best_ndcg + self.tolerance or (
            abs(ndcg - self.best_ndcg) <= self.tolerance and loss < self.best_loss
        )
        if improved:
            self.best_ndcg, self.best_loss, self.best_epoch = ndcg, loss, epoch
            self.stale_rounds = 0
        else:
            self.stale_rounds += 1
        return improved

    @property
    def should_stop(self) -> bool:
        return self.patience is not None and self.stale_rounds >= self.patience
