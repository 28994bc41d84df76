"""Tests for experiment configuration loading and merging."""

from __future__ import annotations

from pathlib import Path

import pytest
from pydantic import ValidationError

from dilate.config import ExperimentConfig, build_config, load_config
from dilate.errors import UsageError
from dilate.status import DatasetKind, LossKind


class TestExperimentConfig:
    """Tests for ExperimentConfig validation."""

    def test_defaults(self) -> None:
        """Defaults select DILATE on the synthetic benchmark."""
        config = ExperimentConfig()
        assert config.loss is LossKind.DILATE
        assert config.compare_loss is LossKind.MSE
        assert config.dataset is DatasetKind.SYNTHETIC
        assert config.window == (20, 20)
        assert (config.alpha, config.gamma) == (0.5, 0.01)

    def test_csv_requires_path_and_window(self) -> None:
        """CSV data needs a path, an input length and a horizon."""
        with pytest.raises(ValidationError, match="csv_path"):
            ExperimentConfig(dataset="csv", input_len=5, horizon=3)
        with pytest.raises(ValidationError, match="input_len"):
            ExperimentConfig(dataset="csv", csv_path="x.csv")
        config = ExperimentConfig(
            dataset="csv", csv_path="x.csv", input_len=5, horizon=3
        )
        assert config.window == (5, 3)

    def test_band_loss_requires_width(self) -> None:
        """The banded loss needs band_width, as the main or the compared loss."""
        with pytest.raises(ValidationError, match="band_width"):
            ExperimentConfig(loss="dilate-t-band")
        with pytest.raises(ValidationError, match="band_width"):
            ExperimentConfig(compare_loss="dilate-t-band")
        assert ExperimentConfig(loss="dilate-t-band", band_width=2).band_width == 2

    def test_ranges(self) -> None:
        """Alpha, gamma and fractions are range-checked."""
        with pytest.raises(ValidationError):
            ExperimentConfig(alpha=1.5)
        with pytest.raises(ValidationError):
            ExperimentConfig(gamma=0.0)
        with pytest.raises(ValidationError, match="sum to 1"):
            ExperimentConfig(split_fractions=(0.5, 0.3, 0.3))

    def test_train_config(self) -> None:
        """A run's schedule carries the loss, seed and overridden alpha."""
        config = ExperimentConfig(epochs=7, patience=3, alpha=0.2)
        train = config.train_config(LossKind.DTW, seed=11, alpha=0.9)
        assert (train.max_epochs, train.patience, train.seed) == (7, 3, 11)
        assert train.loss is LossKind.DTW
        assert train.loss_config.alpha == 0.9
        assert config.train_config(LossKind.DILATE, seed=0).loss_config.alpha == 0.2


class TestLoadConfig:
    """Tests for load_config and build_config."""

    def test_yaml_file(self, tmp_path: Path) -> None:
        """YAML mappings load as dicts."""
        path = tmp_path / "c.yaml"
        path.write_text("loss: dtw\nruns: 3\nsynthetic:\n  n_series: 40\n")
        expected = {"loss": "dtw", "runs": 3, "synthetic": {"n_series": 40}}
        assert load_config(path) == expected

    def test_json_file(self, tmp_path: Path) -> None:
        """JSON is accepted as well."""
        path = tmp_path / "c.json"
        path.write_text('{"alpha": 0.8, "epochs": 5}')
        assert load_config(path) == {"alpha": 0.8, "epochs": 5}

    def test_empty_file(self, tmp_path: Path) -> None:
        """An empty file means no settings."""
        path = tmp_path / "c.yaml"
        path.write_text("")
        assert load_config(path) == {}

    def test_missing_file(self, tmp_path: Path) -> None:
        """A missing config is a usage error."""
        with pytest.raises(UsageError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_not_a_mapping(self, tmp_path: Path) -> None:
        """A top-level list is refused."""
        path = tmp_path / "c.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(UsageError, match="mapping"):
            load_config(path)

    def test_malformed_yaml(self, tmp_path: Path) -> None:
        """Unparseable YAML is a usage error."""
        path = tmp_path / "c.yaml"
        path.write_text("loss: [dtw\n")
        with pytest.raises(UsageError, match="cannot parse"):
            load_config(path)

    def test_overrides_win(self, tmp_path: Path) -> None:
        """Explicit flags override file values; None flags do not."""
        path = tmp_path / "c.yaml"
        path.write_text("loss: dtw\nruns: 3\nepochs: 9\n")
        config = build_config(path, {"runs": 5, "epochs": None})
        assert (config.loss, config.runs, config.epochs) == (LossKind.DTW, 5, 9)

    def test_nested_merge(self, tmp_path: Path) -> None:
        """Nested mappings merge key by key."""
        path = tmp_path / "c.yaml"
        path.write_text("synthetic:\n  n_series: 40\n  seed: 2\n")
        config = build_config(path, {"synthetic": {"seed": 9}})
        assert (config.synthetic.n_series, config.synthetic.seed) == (40, 9)

    def test_without_file(self) -> None:
        """Overrides alone build a config."""
        assert build_config(None, {"alpha": 0.3}).alpha == 0.3
