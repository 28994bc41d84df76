"""Enumerations shared across the loss, training and reporting modules."""

from enum import Enum


class LossKind(str, Enum):
    """Training loss selector, spelled as on the command line."""

    MSE = "mse"
    DTW = "dtw"
    DILATE = "dilate"
    DILATE_T_WEIGHTED = "dilate-t-weighted"
    DILATE_T_BAND = "dilate-t-band"


class OmegaKind(str, Enum):
    """Form of the temporal penalty matrix."""

    SQUARED = "squared"
    SAKOE_CHIBA = "sakoe_chiba"
    WEIGHTED = "weighted"


class Split(str, Enum):
    """Dataset partition tag."""

    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


class RunStatus(str, Enum):
    """Outcome of a single training run."""

    OK = "OK"
    DIVERGED = "DIVERGED"


class DatasetKind(str, Enum):
    """Source of experiment data."""

    SYNTHETIC = "synthetic"
    CSV = "csv"


class CsvLayout(str, Enum):
    """How series are laid out in a user CSV file."""

    ROWS = "rows"
    COLUMN = "column"
