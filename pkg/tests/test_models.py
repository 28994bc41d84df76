"""Tests for the forecaster, its optimizer and training loop."""

from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import replace

import numpy as np
import pytest

from dilate.dataset import Dataset
from dilate.errors import DataError, TrainingDivergedError, UsageError
from dilate.losses import LossConfig, dilate_loss
from dilate.models import (
    CHECKPOINT_VERSION,
    MlpParams,
    TrainConfig,
    adam_init,
    adam_step,
    init_mlp,
    load_checkpoint,
    mlp_backward,
    mlp_forward,
    predict,
    save_checkpoint,
    train,
)
from dilate.status import LossKind, Split
from tests.oracles import central_difference, relative_error

BLOCKS = ("w1", "b1", "w2", "b2")


def _mse(params: MlpParams, data: Dataset) -> float:
    return float(np.mean((predict(params, data.inputs) - data.targets) ** 2))


def _linear_task(n: int = 4, k: int = 2, rows: int = 64, seed: int = 0) -> Dataset:
    """Targets that are a fixed linear map of the inputs; ``seed`` picks inputs."""
    mixing = np.random.default_rng(100).uniform(-0.5, 0.5, size=(n, k))
    inputs = np.random.default_rng(seed).uniform(size=(rows, n))
    return Dataset(inputs, inputs @ mixing, Split.TRAIN)


def _block_fd(
    params: MlpParams, name: str, fn: Callable[[MlpParams], float]
) -> np.ndarray:
    """Finite-difference gradient of ``fn(params)`` in one parameter block."""

    def scalar(values: np.ndarray) -> float:
        return fn(replace(params, **{name: values}))

    return central_difference(scalar, getattr(params, name))


class TestMlpParams:
    """Tests for parameter construction and initialization."""

    def test_init_shapes(self) -> None:
        """Blocks follow (H, n), (H,), (k, H), (k,)."""
        params = init_mlp(5, 3, hidden=7)
        assert params.w1.shape == (7, 5)
        assert params.b1.shape == (7,)
        assert params.w2.shape == (3, 7)
        assert params.b2.shape == (3,)
        assert (params.input_len, params.horizon, params.hidden) == (5, 3, 7)

    def test_init_deterministic(self) -> None:
        """The same seed gives the same weights."""
        a, b = init_mlp(4, 2, hidden=6, seed=11), init_mlp(4, 2, hidden=6, seed=11)
        for x, y in zip(a.blocks(), b.blocks(), strict=True):
            np.testing.assert_array_equal(x, y)

    def test_init_bounds(self) -> None:
        """Weights lie within one over the square root of the fan-in."""
        params = init_mlp(16, 2, hidden=25)
        assert np.all(np.abs(params.w1) <= 0.25)
        assert np.all(np.abs(params.w2) <= 0.2)

    def test_inconsistent_shapes(self) -> None:
        """Mismatched blocks are rejected."""
        params = init_mlp(3, 2, hidden=4)
        with pytest.raises(UsageError):
            replace(params, b1=np.zeros(5))

    def test_invalid_sizes(self) -> None:
        """Sizes must be positive."""
        with pytest.raises(UsageError):
            init_mlp(0, 2)


class TestForwardBackward:
    """Tests for mlp_forward and mlp_backward."""

    def test_vector_and_batch_agree(self) -> None:
        """A single input gives the matching row of the batched forecast."""
        params = init_mlp(4, 3, hidden=5)
        x = np.random.default_rng(0).uniform(size=(6, 4))
        batch = predict(params, x)
        assert batch.shape == (6, 3)
        np.testing.assert_allclose(predict(params, x[2]), batch[2])

    def test_wrong_input_length(self) -> None:
        """Inputs must have the model's input length."""
        with pytest.raises(UsageError):
            predict(init_mlp(4, 3, hidden=5), np.zeros(3))

    def test_gradients_match_finite_differences(self) -> None:
        """Backprop of <pred, g> matches central differences in every block."""
        rng = np.random.default_rng(1)
        params = init_mlp(3, 2, hidden=4, seed=1)
        x = rng.uniform(size=(5, 3))
        g = rng.normal(size=(5, 2))
        _, cache = mlp_forward(params, x)
        grads = mlp_backward(params, cache, g)

        def objective(p: MlpParams) -> float:
            return float(np.sum(predict(p, x) * g))

        for name in BLOCKS:
            expected = _block_fd(params, name, objective)
            assert relative_error(getattr(grads, name), expected) < 1e-6

    def test_single_sample_backward(self) -> None:
        """A vector forward pass takes a vector gradient."""
        params = init_mlp(3, 2, hidden=4)
        _, cache = mlp_forward(params, np.ones(3))
        grads = mlp_backward(params, cache, np.ones(2))
        assert grads.w2.shape == (2, 4)

    def test_stale_cache(self) -> None:
        """A cache from other parameters is refused."""
        params = init_mlp(3, 2, hidden=4)
        _, cache = mlp_forward(params, np.ones(3))
        other = replace(params, b2=params.b2 + 1.0)
        with pytest.raises(UsageError):
            mlp_backward(other, cache, np.ones(2))

    def test_gradient_shape_mismatch(self) -> None:
        """The forecast gradient must match the forecast shape."""
        params = init_mlp(3, 2, hidden=4)
        _, cache = mlp_forward(params, np.ones((2, 3)))
        with pytest.raises(UsageError):
            mlp_backward(params, cache, np.ones((2, 3)))

    def test_end_to_end_through_dilate(self) -> None:
        """Weight gradients through DILATE match finite differences."""
        rng = np.random.default_rng(2)
        params = init_mlp(6, 4, hidden=8, seed=2)
        x = rng.uniform(size=6)
        target = rng.uniform(size=4)
        config = LossConfig(alpha=0.5, gamma=0.1)

        pred, cache = mlp_forward(params, x)
        result = dilate_loss(pred, target, config)
        assert result.grad is not None
        grads = mlp_backward(params, cache, result.grad)

        def objective(p: MlpParams) -> float:
            return dilate_loss(predict(p, x), target, config, need_grad=False).value

        for name in BLOCKS:
            expected = _block_fd(params, name, objective)
            assert relative_error(getattr(grads, name), expected) < 1e-4


class TestAdam:
    """Tests for the ADAM update."""

    def test_first_step_moves_by_learning_rate(self) -> None:
        """Bias correction makes the first step lr times the gradient sign."""
        params = init_mlp(3, 2, hidden=4)
        grads = MlpParams(*(np.full_like(b, -2.0) for b in params.blocks()))
        new, state = adam_step(adam_init(params, lr=1e-3), params, grads)
        assert state.t == 1
        for old, moved in zip(params.blocks(), new.blocks(), strict=True):
            np.testing.assert_allclose(moved - old, 1e-3, rtol=1e-6)

    def test_zero_gradient(self) -> None:
        """A zero gradient leaves the parameters unchanged."""
        params = init_mlp(3, 2, hidden=4)
        grads = MlpParams(*(np.zeros_like(b) for b in params.blocks()))
        new, _ = adam_step(adam_init(params), params, grads)
        for old, moved in zip(params.blocks(), new.blocks(), strict=True):
            np.testing.assert_array_equal(moved, old)

    def test_two_step_recurrence(self) -> None:
        """Moments and bias corrections follow the ADAM recurrence."""
        params = init_mlp(2, 1, hidden=2)
        g1 = MlpParams(*(np.full_like(b, 1.0) for b in params.blocks()))
        g2 = MlpParams(*(np.full_like(b, 3.0) for b in params.blocks()))
        state = adam_init(params, lr=0.1)
        p1, state = adam_step(state, params, g1)
        p2, state = adam_step(state, p1, g2)

        m = 0.9 * 0.1 * 1.0 + 0.1 * 3.0
        v = 0.999 * 0.001 * 1.0 + 0.001 * 9.0
        m_hat = m / (1 - 0.9**2)
        v_hat = v / (1 - 0.999**2)
        step = 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
        np.testing.assert_allclose(p1.w1 - p2.w1, step, rtol=1e-10)
        np.testing.assert_allclose(state.m[0], m)
        np.testing.assert_allclose(state.v[0], v)


class TestTrain:
    """Tests for the training loop."""

    def _config(self, **overrides: object) -> TrainConfig:
        base: dict[str, object] = {
            "max_epochs": 40,
            "patience": 40,
            "batch_size": 16,
            "learning_rate": 1e-2,
            "hidden_size": 16,
            "seed": 3,
        }
        base.update(overrides)
        return TrainConfig.model_validate(base)

    def test_learns_linear_task(self) -> None:
        """Validation MSE falls well below that of the initial weights."""
        train_set = _linear_task(seed=0)
        valid_set = _linear_task(rows=32, seed=1)
        params = init_mlp(4, 2, hidden=16, seed=3)
        before = _mse(params, valid_set)
        trained, trace = train(params, train_set, valid_set, self._config())
        after = _mse(trained, valid_set)
        assert after < 0.5 * before
        assert trace.best_valid == pytest.approx(after)

    def test_deterministic(self) -> None:
        """Equal seeds give identical parameters and traces."""
        data = _linear_task(rows=24)
        config = self._config(max_epochs=5)
        params = init_mlp(4, 2, hidden=16, seed=3)
        a, trace_a = train(params, data, data, config)
        b, trace_b = train(params, data, data, config)
        for x, y in zip(a.blocks(), b.blocks(), strict=True):
            np.testing.assert_array_equal(x, y)
        assert trace_a.valid_loss == trace_b.valid_loss

    def test_keeps_best_epoch(self) -> None:
        """The reported best epoch holds the minimum validation loss."""
        data = _linear_task(rows=24)
        config = self._config(max_epochs=8)
        _, trace = train(init_mlp(4, 2, hidden=16), data, data, config)
        assert len(trace.valid_loss) <= 8
        assert trace.best_valid == min(trace.valid_loss)
        assert trace.valid_loss[trace.best_epoch] == trace.best_valid

    def test_early_stopping(self) -> None:
        """Training stops once validation stalls for `patience` epochs."""
        data = _linear_task(rows=24)
        config = self._config(max_epochs=200, patience=1, learning_rate=0.5)
        _, trace = train(init_mlp(4, 2, hidden=16), data, data, config)
        if trace.stopped_early:
            assert len(trace.valid_loss) == trace.best_epoch + 2
        else:
            assert len(trace.valid_loss) == 200

    def test_dilate_training_runs(self) -> None:
        """Training with DILATE completes and records finite losses."""
        data = _linear_task(n=5, k=4, rows=16)
        config = self._config(max_epochs=3, loss="dilate")
        assert config.loss is LossKind.DILATE
        _, trace = train(init_mlp(5, 4, hidden=8), data, data, config)
        assert all(np.isfinite(trace.train_loss))

    def test_empty_dataset(self) -> None:
        """An empty training set is a data error."""
        empty = Dataset(np.zeros((0, 4)), np.zeros((0, 2)), Split.TRAIN)
        with pytest.raises(DataError):
            train(init_mlp(4, 2), empty, _linear_task(), self._config())

    def test_window_mismatch(self) -> None:
        """Datasets must match the model's window sizes."""
        with pytest.raises(UsageError):
            train(init_mlp(3, 2), _linear_task(), _linear_task(), self._config())

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence(self) -> None:
        """An absurd learning rate surfaces as a divergence error."""
        data = _linear_task(rows=16)
        config = self._config(learning_rate=1e300, batch_size=4)
        with pytest.raises(TrainingDivergedError):
            train(init_mlp(4, 2, hidden=16), data, data, config)


class TestCheckpoint:
    """Tests for checkpoint persistence."""

    def test_round_trip(self, tmp_path) -> None:  # type: ignore[no-untyped-def]
        """Loading a saved checkpoint restores every weight exactly."""
        params = init_mlp(5, 3, hidden=6, seed=9)
        path = save_checkpoint(params, tmp_path / "ckpt" / "model.json")
        loaded = load_checkpoint(path)
        for x, y in zip(params.blocks(), loaded.blocks(), strict=True):
            np.testing.assert_array_equal(x, y)

    def test_missing_file(self, tmp_path) -> None:  # type: ignore[no-untyped-def]
        """A missing checkpoint is a data error."""
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "absent.json")

    def test_bad_version(self, tmp_path) -> None:  # type: ignore[no-untyped-def]
        """An unknown format version is refused."""
        path = save_checkpoint(init_mlp(2, 1, hidden=2), tmp_path / "m.json")
        payload = json.loads(path.read_text())
        assert payload["version"] == CHECKPOINT_VERSION
        payload["version"] = "other/9"
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_wrong_block_size(self, tmp_path) -> None:  # type: ignore[no-untyped-def]
        """A block whose length disagrees with the header is refused."""
        path = save_checkpoint(init_mlp(2, 1, hidden=2), tmp_path / "m.json")
        payload = json.loads(path.read_text())
        payload["b1"] = payload["b1"][:1]
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_malformed_json(self, tmp_path) -> None:  # type: ignore[no-untyped-def]
        """Unparseable content is a data error."""
        path = tmp_path / "m.json"
        path.write_text("{not json")
        with pytest.raises(DataError):
            load_checkpoint(path)
