"""Forecasting datasets: windowing, chronological splits and scaling."""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .errors import DataError, UsageError
from .kernels import FloatArray
from .status import Split


@dataclass(frozen=True)
class Dataset:
    """N input windows of length n paired with N targets of length k."""

    inputs: FloatArray
    targets: FloatArray
    split: Split
    provenance: dict[str, object] = field(default_factory=dict)
    step_indices: tuple[int, ...] | None = None
    peak_positions: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if inputs.ndim != 2 or targets.ndim != 2:
            raise DataError("inputs and targets must be 2-D (N, length)")
        if inputs.shape[0] != targets.shape[0]:
            raise DataError(
                f"{inputs.shape[0]} inputs but {targets.shape[0]} targets"
            )
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise DataError("dataset entries must be finite")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def input_len(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def horizon(self) -> int:
        return int(self.targets.shape[1])


@dataclass(frozen=True)
class DataSplits:
    train: Dataset
    valid: Dataset
    test: Dataset

    def __iter__(self) -> Iterator[Dataset]:
        return iter((self.train, self.valid, self.test))


def window_series(
    series: ArrayLike,
    input_len: int,
    horizon: int,
    stride: int = 1,
    split: Split = Split.TRAIN,
    provenance: dict[str, object] | None = None,
) -> Dataset:
    """Sliding windows ``series[s : s + n]`` -> ``series[s + n : s + n + k]``."""
    y = np.asarray(series, dtype=np.float64).ravel()
    if input_len < 1 or horizon < 1 or stride < 1:
        raise UsageError("input length, horizon and stride must be >= 1")
    span = input_len + horizon
    if y.size < span:
        raise DataError(
            f"series of length {y.size} is shorter than input + horizon = {span}"
        )
    starts = np.arange(0, y.size - span + 1, stride)
    inputs = np.stack([y[s : s + input_len] for s in starts])
    targets = np.stack([y[s + input_len : s + span] for s in starts])
    return Dataset(inputs, targets, split, dict(provenance or {}))


def chronological_split(
    series: ArrayLike,
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
    min_length: int = 1,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Contiguous train/valid/test segments cut at floor of cumulative fractions."""
    y = np.asarray(series, dtype=np.float64).ravel()
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise UsageError(f"expected three non-negative fractions: {tuple(fractions)}")
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise UsageError(f"split fractions must sum to 1: {tuple(fractions)}")
    cuts = np.floor(np.cumsum(fractions) * y.size + 1e-9).astype(int)
    a, b = int(cuts[0]), int(cuts[1])
    segments = (y[:a], y[a:b], y[b:])
    for name, seg in zip(Split, segments, strict=True):
        if seg.size < max(1, min_length):
            raise DataError(
                f"{name.value} segment has {seg.size} points, "
                f"need at least {min_length}"
            )
    return segments


def minmax_scale(values: ArrayLike) -> FloatArray:
    """Scale each row to [0, 1]; constant rows map to 0."""
    arr = np.asarray(values, dtype=np.float64)
    row = arr[None, :] if arr.ndim == 1 else arr
    lo = row.min(axis=1, keepdims=True)
    span = row.max(axis=1, keepdims=True) - lo
    scaled = np.where(span > 0, (row - lo) / np.where(span > 0, span, 1.0), 0.0)
    return scaled[0] if arr.ndim == 1 else scaled


def dataset_from_rows(
    rows: ArrayLike,
    input_len: int,
    horizon: int,
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
    source: str = "",
) -> DataSplits:
    """One sample per row: the first n points are input, the next k the target.

    Rows are min-max scaled individually and divided among the splits in
    order.
    """
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise DataError("expected a non-empty matrix of series")
    if matrix.shape[1] < input_len + horizon:
        raise DataError(
            f"rows of length {matrix.shape[1]} are shorter than "
            f"input + horizon = {input_len + horizon}"
        )
    scaled = minmax_scale(matrix)
    n_rows = scaled.shape[0]
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise UsageError(f"split fractions must sum to 1: {tuple(fractions)}")
    cuts = np.floor(np.cumsum(fractions) * n_rows + 1e-9).astype(int)
    bounds = (0, int(cuts[0]), int(cuts[1]), n_rows)
    parts = []
    for i, split in enumerate(Split):
        block = scaled[bounds[i] : bounds[i + 1]]
        if block.shape[0] == 0:
            raise DataError(f"{split.value} split is empty with {n_rows} rows")
        parts.append(
            Dataset(
                block[:, :input_len],
                block[:, input_len : input_len + horizon],
                split,
                {"source": source, "layout": "rows"},
            )
        )
    return DataSplits(*parts)


def dataset_from_long_series(
    series: ArrayLike,
    input_len: int,
    horizon: int,
    stride: int = 1,
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
    source: str = "",
) -> DataSplits:
    """Split one long series chronologically, then window each segment.

    Scaling uses the training segment's range so test windows never inform it.
    """
    y = np.asarray(series, dtype=np.float64).ravel()
    segments = chronological_split(y, fractions, min_length=input_len + horizon)
    lo = float(segments[0].min())
    span = float(segments[0].max()) - lo
    scale = span if span > 0 else 1.0
    parts = []
    offset = 0
    for split, seg in zip(Split, segments, strict=True):
        provenance: dict[str, object] = {
            "source": source,
            "layout": "column",
            "offset": offset,
        }
        scaled = (seg - lo) / scale
        parts.append(
            window_series(scaled, input_len, horizon, stride, split, provenance)
        )
        offset += seg.size
    return DataSplits(*parts)
