"""Experiment configuration: pydantic models and config-file loading.

A config file is a YAML or JSON mapping of :class:`ExperimentConfig` fields.
Command-line flags that were given explicitly override file values.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

from .errors import UsageError
from .losses import LossConfig
from .models import TrainConfig
from .status import CsvLayout, DatasetKind, LossKind
from .synthetic import SyntheticSpec

_BAND_LOSSES = {LossKind.DILATE_T_BAND}

Fractions = tuple[float, float, float]


class ExperimentConfig(BaseModel):
    """Everything one CLI invocation needs: data, loss, schedule and output."""

    dataset: DatasetKind = DatasetKind.SYNTHETIC
    csv_path: str | None = None
    csv_layout: CsvLayout = CsvLayout.ROWS
    csv_header: bool = False
    encoding_confidence_threshold: float = Field(default=0.8, ge=0.0, le=1.0)
    input_len: int | None = Field(default=None, ge=1)
    horizon: int | None = Field(default=None, ge=1)
    stride: int = Field(default=1, ge=1)
    split_fractions: Fractions = (0.6, 0.2, 0.2)
    synthetic: SyntheticSpec = SyntheticSpec()

    loss: LossKind = LossKind.DILATE
    compare_loss: LossKind = LossKind.MSE
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    gamma: float = Field(default=0.01, gt=0.0)
    band_width: int | None = Field(default=None, ge=0)

    runs: int = Field(default=1, ge=1)
    seed: int = 0
    epochs: int = Field(default=1000, ge=1)
    patience: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    hidden_size: int = Field(default=128, ge=1)
    out: str = "out"

    @field_validator("split_fractions")
    @classmethod
    def validate_fractions(cls, v: Fractions) -> Fractions:
        """Ensure split fractions are non-negative and sum to 1."""
        if any(f < 0 for f in v) or abs(sum(v) - 1.0) > 1e-9:
            raise ValueError(f"split_fractions must be non-negative and sum to 1: {v}")
        return v

    @model_validator(mode="after")
    def validate_dataset(self) -> ExperimentConfig:
        """Require a path and window sizes for CSV data."""
        if self.dataset is DatasetKind.CSV:
            if not self.csv_path:
                raise ValueError("dataset 'csv' requires csv_path")
            if self.input_len is None or self.horizon is None:
                raise ValueError("dataset 'csv' requires input_len and horizon")
        return self

    @model_validator(mode="after")
    def validate_band_width(self) -> ExperimentConfig:
        """Require a band width whenever a banded loss is selected."""
        if {self.loss, self.compare_loss} & _BAND_LOSSES and self.band_width is None:
            raise ValueError("loss 'dilate-t-band' requires band_width")
        return self

    @property
    def window(self) -> tuple[int, int]:
        """Input length and horizon of the selected dataset."""
        if self.dataset is DatasetKind.SYNTHETIC:
            return self.synthetic.input_len, self.synthetic.horizon
        assert self.input_len is not None and self.horizon is not None
        return self.input_len, self.horizon

    def loss_config(self, alpha: float | None = None) -> LossConfig:
        return LossConfig(
            alpha=self.alpha if alpha is None else alpha,
            gamma=self.gamma,
            band_width=self.band_width,
        )

    def train_config(
        self, loss: LossKind, seed: int, alpha: float | None = None
    ) -> TrainConfig:
        """Training schedule for one run of ``loss`` with ``seed``."""
        return TrainConfig(
            max_epochs=self.epochs,
            patience=self.patience,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            hidden_size=self.hidden_size,
            seed=seed,
            loss=loss,
            loss_config=self.loss_config(alpha),
        )


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a YAML or JSON config file into a mapping."""
    src = Path(path)
    if not src.is_file():
        raise UsageError(f"config file not found: {src}")
    try:
        with open(src, encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise UsageError(f"cannot parse config file {src}: {e}") from e
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise UsageError(f"config file must contain a mapping: {src}")
    return raw


def build_config(
    config_path: str | Path | None, overrides: dict[str, Any]
) -> ExperimentConfig:
    """Merge file values with explicit overrides.

    ``None`` overrides are ignored and nested mappings are merged key by key.
    """
    values = load_config(config_path) if config_path is not None else {}
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(values.get(key), dict):
            values[key] = {**values[key], **value}
        else:
            values[key] = value
    return ExperimentConfig.model_validate(values)
