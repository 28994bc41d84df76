"""Two-peak input, step-target benchmark generator.

Each series has a zero baseline with two impulses at positions i1 < i2 in the
input window. The target is a step from the first impulse amplitude to the
second, placed ``i2 - i1`` steps after i2 plus a random offset, so that the
timing of the step is predictable from the input while its exact position is
jittered.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .dataset import Dataset, DataSplits
from .errors import InfeasibleSpecError
from .logger import get_logger
from .status import Split

logger = get_logger(__name__)


class SyntheticSpec(BaseModel):
    """Generator settings; defaults reproduce the 500/500/500 benchmark."""

    model_config = ConfigDict(frozen=True)

    n_series: int = Field(default=500, ge=1)
    series_length: int = 40
    input_len: int = Field(default=20, ge=2)
    horizon: int = Field(default=20, ge=2)
    noise_variance: float = Field(default=0.01, ge=0.0)
    seed: int = 0
    max_offset: int = Field(default=3, ge=0)

    @model_validator(mode="after")
    def validate_lengths(self) -> SyntheticSpec:
        """Require series_length = input_len + horizon."""
        if self.series_length != self.input_len + self.horizon:
            raise ValueError(
                f"series_length ({self.series_length}) must equal "
                f"input_len + horizon ({self.input_len + self.horizon})"
            )
        return self


def _step_position(i1: int, i2: int, offset: int, input_len: int) -> int:
    """0-based step position inside the target window."""
    return 2 * i2 - i1 + offset - input_len


def check_feasible(spec: SyntheticSpec) -> None:
    """Raise unless some (i1, i2, offset) puts the step strictly inside the target."""
    n, k = spec.input_len, spec.horizon
    for i1 in range(n - 1):
        for i2 in range(i1 + 1, n):
            for off in range(-spec.max_offset, spec.max_offset + 1):
                if 1 <= _step_position(i1, i2, off, n) <= k - 1:
                    return
    raise InfeasibleSpecError(
        f"no peak placement yields a step inside a horizon of {k} "
        f"after an input window of {n}"
    )


def _generate_split(
    spec: SyntheticSpec, rng: np.random.Generator, split: Split
) -> Dataset:
    n, k = spec.input_len, spec.horizon
    series = np.zeros((spec.n_series, n + k))
    steps: list[int] = []
    peaks: list[tuple[int, int]] = []
    for row in range(spec.n_series):
        while True:
            i1 = int(rng.integers(0, n - 1))
            i2 = int(rng.integers(i1 + 1, n))
            off = int(rng.integers(-spec.max_offset, spec.max_offset + 1))
            rel = _step_position(i1, i2, off, n)
            if 1 <= rel <= k - 1:
                break
        j1, j2 = rng.random(), rng.random()
        series[row, i1] = j1
        series[row, i2] = j2
        series[row, n : n + rel] = j1
        series[row, n + rel :] = j2
        steps.append(rel + 1)
        peaks.append((i1 + 1, i2 + 1))
    if spec.noise_variance > 0:
        series += rng.normal(0.0, np.sqrt(spec.noise_variance), size=series.shape)
    return Dataset(
        inputs=series[:, :n],
        targets=series[:, n:],
        split=split,
        provenance={"generator": "synthetic", "seed": spec.seed, "split": split.value},
        step_indices=tuple(steps),
        peak_positions=tuple(peaks),
    )


def generate_synthetic(spec: SyntheticSpec) -> DataSplits:
    """Train, validation and test sets, each with its own spawned RNG stream.

    Step indices (1-based, within the target) and peak positions (1-based,
    within the input) are recorded on each dataset.
    """
    check_feasible(spec)
    streams = np.random.SeedSequence(spec.seed).spawn(len(Split))
    parts = [
        _generate_split(spec, np.random.default_rng(stream), split)
        for stream, split in zip(streams, Split, strict=True)
    ]
    logger.info(
        "Synthetic dataset generated",
        extra={
            "seed": spec.seed,
            "n_series": spec.n_series,
            "input_len": spec.input_len,
            "horizon": spec.horizon,
        },
    )
    return DataSplits(*parts)
