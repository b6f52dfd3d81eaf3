import pytest
import torch

from hashcf.core.errors import TrainingDivergedError
from hashcf.core.instrumentation import BatchTimer, trace
from hashcf.core.stopping import DivergenceGuard, EarlyStopping


def test_early_stopping_prefers_higher_ndcg_then_lower_loss():
    stopper = EarlyStopping(patience=2)
    assert stopper.update(1, 0.5, 1.0)
    assert stopper.update(2, 0.6, 2.0)
    assert stopper.update(3, 0.6, 1.5)
    assert not stopper.update(4, 0.6, 1.5)
    assert stopper.best_epoch == 3
    assert not stopper.should_stop
    assert not stopper.update(5, 0.1, 0.1)
    assert stopper.should_stop


def test_no_patience_never_stops():
    stopper = EarlyStopping(patience=None)
    stopper.update(1, 1.0, 0.0)
    for epoch in range(2, 50):
        stopper.update(epoch, 0.0, 1.0)
    assert not stopper.should_stop


def test_divergence_guard():
    guard = DivergenceGuard()
    guard.check(torch.tensor(1.0), 1, 1)
    with pytest.raises(TrainingDivergedError, match="epoch 2, iteration 7"):
        guard.check(torch.tensor(float("nan")), 2, 7)
    guard.disable("inf")
    guard.check(torch.tensor(float("inf")), 1, 1)


def test_trace_records_durations():
    timer = BatchTimer()

    @trace(timer, "step")
    def step(x):
        return x + 1

    assert step(1) == 2 and step(2) == 3
    assert timer.count("step") == 2
    assert timer.mean("step") >= 0.0
    assert timer.mean("missing") == 0.0
