#!/usr/bin/env python3
"""
Tests for AdamW, metrics and the training loop.
"""

from unittest.mock import Mock

import numpy as np
import pytest

from fivcmmcan.datasets import GeneratorConfig, generate_dataset
from fivcmmcan.matchers import OracleProvider
from fivcmmcan.models import ModelConfig, Variant, create_model
from fivcmmcan.tensors import Tensor
from fivcmmcan.training import (
    AdamW,
    AdamWState,
    EpochRecord,
    Metrics,
    TrainConfig,
    TrainingError,
    TrainingEvent,
    TrainingMonitor,
    adamw_step,
    confusion_metrics,
    evaluate_metrics,
    fit,
)


@pytest.fixture
def splits():
    cfg = GeneratorConfig(vocab_size=50, m=6, n=4, p=8, n_train=16, n_val=8, n_test=8, seed=2)
    return generate_dataset(cfg)


def _model(variant=Variant.FULL, seed=0):
    config = ModelConfig(vocab_size=50, d=16, heads=2, m=6, n=4, p=8, dropout=0.1)
    return create_model(config, OracleProvider(), variant=variant, seed=seed)


def _record(epoch, accuracy):
    return EpochRecord(
        epoch=epoch, train_loss=1.0, val_accuracy=accuracy, val_f1_fake=0.0, val_f1_real=0.0
    )


class TestAdamW:
    """Test the optimizer update."""

    def _state(self, shape=(3,), **kwargs):
        return AdamWState(["w"], [shape], **kwargs)

    def test_zero_gradient_no_decay(self):
        """Test a zero gradient with wd = 0 leaves the parameter unchanged."""
        w = Tensor([1.0, -2.0, 3.0], requires_grad=True)
        adamw_step([w], [np.zeros(3)], self._state(weight_decay=0.0))
        np.testing.assert_array_equal(w.data, [1.0, -2.0, 3.0])

    def test_decay_only(self):
        """Test a zero gradient shrinks the parameter by (1 - lr * wd)."""
        w = Tensor([1.0, -2.0, 3.0], requires_grad=True)
        adamw_step([w], [np.zeros(3)], self._state(lr=0.01, weight_decay=0.1))
        np.testing.assert_allclose(w.data, np.array([1.0, -2.0, 3.0]) * (1 - 0.001))

    def test_first_step_size(self):
        """Test the first bias-corrected step moves each coordinate by about lr."""
        w = Tensor([0.0, 0.0], requires_grad=True)
        adamw_step([w], [np.array([0.5, -3.0])], self._state((2,), lr=0.01, weight_decay=0.0))
        np.testing.assert_allclose(w.data, [-0.01, 0.01], rtol=1e-6)

    def test_without_decay_is_adam(self):
        """Test wd = 0 over several steps against a direct Adam computation."""
        w = Tensor([0.3, -0.7], requires_grad=True)
        state = self._state((2,), lr=0.05, weight_decay=0.0)
        grads = [np.array([0.1, -0.2]), np.array([0.4, 0.1]), np.array([-0.3, 0.2])]
        theta, m, v = np.array([0.3, -0.7]), np.zeros(2), np.zeros(2)
        for t, g in enumerate(grads, start=1):
            adamw_step([w], [g], state)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            theta = theta - 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(w.data, theta, atol=1e-12)
        assert state.step == 3

    def test_nan_gradient(self):
        """Test a NaN gradient names its parameter and changes nothing."""
        a = Tensor([1.0], requires_grad=True)
        b = Tensor([2.0], requires_grad=True)
        state = AdamWState(["layer.a", "layer.b"], [(1,), (1,)])
        with pytest.raises(TrainingError, match="layer.b"):
            adamw_step([a, b], [np.array([0.1]), np.array([np.nan])], state)
        assert a.data[0] == 1.0
        assert state.step == 0

    def test_missing_gradient_skipped(self):
        """Test a None gradient leaves its parameter alone."""
        a = Tensor([1.0], requires_grad=True)
        b = Tensor([2.0], requires_grad=True)
        state = AdamWState(["a", "b"], [(1,), (1,)])
        adamw_step([a, b], [np.array([0.1]), None], state)
        assert b.data[0] == 2.0
        assert a.data[0] != 1.0

    def test_invalid_settings(self):
        """Test hyperparameter validation."""
        with pytest.raises(ValueError, match="learning rate"):
            AdamWState(["w"], [(1,)], lr=0.0)
        with pytest.raises(ValueError, match="betas"):
            AdamWState(["w"], [(1,)], beta1=1.0)
        with pytest.raises(ValueError):
            AdamW([])

    def test_optimizer_wrapper(self):
        """Test AdamW reads gradients from its tensors."""
        w = Tensor([1.0], requires_grad=True)
        optimizer = AdamW([("w", w)], lr=0.1, weight_decay=0.0)
        w.grad = np.array([2.0])
        optimizer.step()
        assert optimizer.steps == 1
        assert w.data[0] == pytest.approx(0.9)
        optimizer.zero_grads()
        np.testing.assert_array_equal(w.grad, [0.0])


class TestMetrics:
    """Test confusion-count metrics."""

    def test_example(self):
        """Test TP=2, FP=1, FN=1, TN=6."""
        metrics = Metrics(tp=2, fp=1, fn=1, tn=6)
        assert metrics.accuracy == pytest.approx(0.8)
        assert metrics.precision_fake == pytest.approx(2 / 3)
        assert metrics.recall_fake == pytest.approx(2 / 3)
        assert metrics.f1_fake == pytest.approx(2 / 3)
        assert metrics.f1_real == pytest.approx(12 / 14)
        assert metrics.avg_f1 == pytest.approx((2 / 3 + 12 / 14) / 2)

    def test_zero_denominators(self):
        """Test undefined rates are 0."""
        metrics = Metrics(tn=5)
        assert metrics.precision_fake == 0.0
        assert metrics.recall_fake == 0.0
        assert metrics.f1_fake == 0.0
        assert metrics.f1_real == 1.0
        assert Metrics().accuracy == 0.0

    def test_confusion_counts(self):
        """Test counting from predictions and labels."""
        metrics = confusion_metrics([1, 1, 0, 0, 1], [1, 0, 1, 0, 1])
        assert (metrics.tp, metrics.fp, metrics.fn, metrics.tn) == (2, 1, 1, 1)

    def test_order_invariant(self):
        """Test permuting the items leaves the metrics unchanged."""
        preds = np.array([1, 0, 1, 1, 0, 0, 1])
        labels = np.array([1, 1, 0, 1, 0, 1, 0])
        order = np.random.default_rng(0).permutation(7)
        assert confusion_metrics(preds, labels) == confusion_metrics(preds[order], labels[order])

    def test_addition(self):
        """Test counts add up."""
        total = Metrics(tp=1, fn=2) + Metrics(fp=3, tn=4)
        assert (total.tp, total.fp, total.fn, total.tn) == (1, 3, 2, 4)

    def test_serialization(self):
        """Test derived rates are serialized with the counts."""
        dumped = Metrics(tp=1, tn=1).model_dump()
        assert dumped["accuracy"] == 1.0
        assert dumped["total"] == 2


class TestTrainingMonitor:
    """Test the training monitor."""

    def test_tracks_best(self):
        """Test history and best epoch."""
        monitor = TrainingMonitor()
        monitor(TrainingEvent.START)
        for epoch, accuracy in [(1, 0.5), (2, 0.7), (3, 0.7)]:
            monitor(TrainingEvent.EPOCH, _record(epoch, accuracy))
        monitor(TrainingEvent.EARLY_STOP)
        monitor(TrainingEvent.FINISH)
        assert len(monitor.history) == 3
        assert monitor.best_epoch == 2
        assert monitor.stopped_early
        assert monitor.finished

    def test_callback_failure_ignored(self):
        """Test a failing callback does not propagate."""
        callback = Mock(side_effect=RuntimeError("display gone"))
        monitor = TrainingMonitor(on_event=callback)
        monitor(TrainingEvent.EPOCH, _record(1, 0.5))
        callback.assert_called_once()
        assert monitor.best_epoch == 1


class TestFit:
    """Test the training loop."""

    def test_runs_and_restores(self, splits):
        """Test a short run reports a consistent history."""
        train, val, _ = splits
        events = []
        monitor = TrainingMonitor(on_event=lambda event, record: events.append(event))
        result = fit(_model(), train, val, TrainConfig(epochs=3, batch_size=4, patience=5), monitor)
        assert [r.epoch for r in result.history] == [1, 2, 3]
        assert events[0] == TrainingEvent.START
        assert events[-1] == TrainingEvent.FINISH
        assert events.count(TrainingEvent.EPOCH) == 3
        best = max(result.history, key=lambda r: r.val_accuracy)
        assert result.history[result.best_epoch - 1].val_accuracy == best.val_accuracy
        assert evaluate_metrics(result.model, val).accuracy == result.best_metrics.accuracy

    @pytest.mark.parametrize("patience,epochs_run", [(0, 2), (2, 4)])
    def test_patience(self, splits, patience, epochs_run):
        """Test stopping once stale epochs exceed the patience."""
        train, val, _ = splits
        config = TrainConfig(epochs=10, batch_size=8, lr=1e-12, patience=patience)
        result = fit(_model(), train, val, config)
        assert len(result.history) == epochs_run
        assert result.best_epoch == 1
        assert result.stopped_early

    def test_deterministic(self, splits):
        """Test a fixed seed reproduces history and parameters."""
        train, val, _ = splits
        config = TrainConfig(epochs=2, batch_size=4, seed=3)
        a = fit(_model(seed=3), train, val, config)
        b = fit(_model(seed=3), train, val, config)
        assert a.history == b.history
        state_a, state_b = a.model.state_dict(), b.model.state_dict()
        for name in state_a:
            assert state_a[name].tobytes() == state_b[name].tobytes()

    def test_full_without_distillation_equals_avg(self, splits):
        """Test FULL at lambda 0 trains exactly like AVG."""
        train, val, _ = splits
        common = {"epochs": 3, "batch_size": 4, "lambda_kl": 0.0, "patience": 10}
        full = fit(_model(Variant.FULL), train, val, TrainConfig(variant=Variant.FULL, **common))
        avg = fit(_model(Variant.AVG), train, val, TrainConfig(variant=Variant.AVG, **common))
        state_full, state_avg = full.model.state_dict(), avg.model.state_dict()
        for name in state_full:
            assert state_full[name].tobytes() == state_avg[name].tobytes()

    def test_empty_splits(self, splits):
        """Test empty splits are rejected."""
        train, val, _ = splits
        with pytest.raises(TrainingError, match="training split is empty"):
            fit(_model(), [], val)
        with pytest.raises(TrainingError, match="validation split is empty"):
            fit(_model(), train, [])

    def test_evaluate_workers(self, splits):
        """Test threaded evaluation matches sequential evaluation."""
        train, _, _ = splits
        model = _model()
        assert evaluate_metrics(model, train, workers=3, batch_size=5) == evaluate_metrics(model, train)

    @staticmethod
    def _separable(n_train, n_val):
        cfg = GeneratorConfig(
            vocab_size=50, m=6, n=4, p=8, n_train=n_train, n_val=n_val, n_test=0,
            signal_strength=1.0, topic_word_prob=1.0,
            mismatch_rate_fake=1.0, mismatch_rate_real=0.0, seed=3,
        )
        train, val, _ = generate_dataset(cfg)
        config = ModelConfig(vocab_size=50, d=16, heads=2, m=6, n=4, p=8, dropout=0.0)
        return train, val, create_model(config, OracleProvider(), seed=0)

    def test_loss_decreases_first_epochs(self):
        """Test the training loss falls every epoch on cued data."""
        train, val, model = self._separable(64, 16)
        result = fit(model, train, val, TrainConfig(epochs=5, batch_size=8, patience=5))
        losses = [r.train_loss for r in result.history]
        assert len(losses) == 5
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))

    def test_separable_data(self):
        """Test every item carrying a cue is learned past 95% validation accuracy."""
        train, val, model = self._separable(128, 64)
        result = fit(model, train, val, TrainConfig(epochs=20, batch_size=8, patience=20))
        assert result.best_metrics.accuracy > 0.95
