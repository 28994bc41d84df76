"""Tests for the synthetic benchmark generator."""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from dilate.errors import InfeasibleSpecError
from dilate.metrics import detect_change_points
from dilate.status import Split
from dilate.synthetic import SyntheticSpec, check_feasible, generate_synthetic


def _small(**overrides: object) -> SyntheticSpec:
    values: dict[str, object] = {"n_series": 50, "seed": 4}
    values.update(overrides)
    return SyntheticSpec.model_validate(values)


class TestSyntheticSpec:
    """Tests for spec validation."""

    def test_defaults(self) -> None:
        """Defaults describe 500 series of 20 + 20 points."""
        spec = SyntheticSpec()
        assert (spec.n_series, spec.input_len, spec.horizon) == (500, 20, 20)
        assert spec.noise_variance == 0.01

    def test_length_mismatch(self) -> None:
        """The series length must equal input plus horizon."""
        with pytest.raises(ValidationError):
            SyntheticSpec(series_length=30)

    def test_infeasible(self) -> None:
        """A spec with no valid step placement is refused."""
        spec = SyntheticSpec(series_length=4, input_len=2, horizon=2, max_offset=0)
        with pytest.raises(InfeasibleSpecError):
            check_feasible(spec)
        with pytest.raises(InfeasibleSpecError):
            generate_synthetic(spec)


class TestGenerateSynthetic:
    """Tests for generate_synthetic."""

    def test_shapes_and_splits(self) -> None:
        """Each split holds n_series windows tagged with its name."""
        splits = generate_synthetic(_small())
        for dataset, split in zip(splits, Split, strict=True):
            assert dataset.inputs.shape == (50, 20)
            assert dataset.targets.shape == (50, 20)
            assert dataset.split is split
            assert dataset.step_indices is not None
            assert len(dataset.step_indices) == 50

    def test_deterministic(self) -> None:
        """Equal seeds give identical data; different seeds do not."""
        a = generate_synthetic(_small())
        b = generate_synthetic(_small())
        c = generate_synthetic(_small(seed=5))
        np.testing.assert_array_equal(a.test.targets, b.test.targets)
        assert a.test.step_indices == b.test.step_indices
        assert not np.array_equal(a.test.targets, c.test.targets)

    def test_splits_use_independent_streams(self) -> None:
        """Train, validation and test draw different series."""
        splits = generate_synthetic(_small())
        assert not np.array_equal(splits.train.inputs, splits.valid.inputs)
        assert not np.array_equal(splits.valid.inputs, splits.test.inputs)

    def test_noiseless_structure(self) -> None:
        """Without noise the target steps from the first peak to the second."""
        spec = _small(noise_variance=0.0)
        data = generate_synthetic(spec).train
        assert data.step_indices is not None and data.peak_positions is not None
        for row, step, (i1, i2) in zip(
            range(len(data)), data.step_indices, data.peak_positions, strict=True
        ):
            x, y = data.inputs[row], data.targets[row]
            assert 1 <= i1 < i2 <= spec.input_len
            assert np.count_nonzero(x) <= 2
            assert 2 <= step <= spec.horizon
            np.testing.assert_array_equal(y[: step - 1], x[i1 - 1])
            np.testing.assert_array_equal(y[step - 1 :], x[i2 - 1])

    def test_step_follows_peak_spacing(self) -> None:
        """The step lands i2 - i1 after the second peak, up to the offset."""
        spec = _small(noise_variance=0.0)
        data = generate_synthetic(spec).valid
        assert data.step_indices is not None and data.peak_positions is not None
        for step, (i1, i2) in zip(data.step_indices, data.peak_positions, strict=True):
            # positions on the full series, both 1-based
            expected = i2 + (i2 - i1)
            actual = spec.input_len + step
            assert abs(actual - expected) <= spec.max_offset

    def test_noiseless_step_is_detected_exactly(self) -> None:
        """Change-point detection recovers every recorded step of clean targets."""
        data = generate_synthetic(_small(noise_variance=0.0)).test
        assert data.step_indices is not None
        for target, step in zip(data.targets, data.step_indices, strict=True):
            assert detect_change_points(target).indices == (step,)

    def test_noise_level(self) -> None:
        """Residual noise has roughly the configured variance."""
        clean = generate_synthetic(_small(noise_variance=0.0, n_series=200))
        noisy = generate_synthetic(_small(noise_variance=0.01, n_series=200))
        # The noise draw follows the structural draws on the same stream.
        residual = noisy.train.targets - clean.train.targets
        assert np.var(residual) == pytest.approx(0.01, rel=0.1)
