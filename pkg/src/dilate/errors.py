"""Exception hierarchy; each class carries the CLI exit code it maps to."""

from __future__ import annotations


class DilateError(Exception):
    """Base class for all dilate errors."""

    exit_code = 1


class UsageError(DilateError, ValueError):
    """Invalid arguments: shapes, parameter ranges, stale intermediate state."""

    exit_code = 1


class DegenerateCostError(UsageError):
    """The blended cost matrix admits no prediction-dependent warping path."""


class InfeasibleSpecError(UsageError):
    """A synthetic dataset spec whose constraints cannot be satisfied."""


class DataError(DilateError):
    """Missing, empty or malformed input data."""

    exit_code = 2


class CsvParseError(DataError):
    """A non-numeric or missing CSV cell, with its 1-based position."""

    def __init__(self, path: str, row: int, column: int, raw: str | None) -> None:
        self.path = path
        self.row = row
        self.column = column
        self.raw = raw
        super().__init__(
            f"{path}: cannot parse cell at row {row}, column {column}: {raw!r}"
        )


class TrainingError(DilateError):
    """Training could not produce a usable model."""

    exit_code = 3


class TrainingDivergedError(TrainingError):
    """The training loss became non-finite."""
