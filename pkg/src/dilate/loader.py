"""Load numeric time series from CSV files through DuckDB.

Handles character encoding detection, optional header rows and structured
error reporting with the 1-based position of the offending cell.
"""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

import chardet
import duckdb
import numpy as np

from .errors import CsvParseError, DataError
from .kernels import FloatArray
from .logger import get_logger
from .status import CsvLayout

logger = get_logger(__name__)

_CHARDET_SAMPLE_SIZE = 8192


class EncodingDetectionError(DataError):
    """Raised when chardet's confidence is below the configured threshold."""


def _resolve_csv_path(file_path: str, confidence_threshold: float) -> tuple[str, bool]:
    """Detect CSV encoding and convert to UTF-8 if needed.

    Returns ``(resolved_path, is_temporary)``. UTF-8 and ASCII files are
    returned unchanged; anything else is copied to a temporary UTF-8 file.
    """
    with open(file_path, "rb") as f:
        sample = f.read(_CHARDET_SAMPLE_SIZE)

    detected = chardet.detect(sample)
    encoding: str = detected.get("encoding") or "utf-8"
    confidence: float = detected.get("confidence") or 0.0

    if confidence < confidence_threshold:
        raise EncodingDetectionError(
            f"{file_path}: encoding detection confidence is below threshold "
            f"(detected={encoding}, confidence={confidence:.2f}, "
            f"threshold={confidence_threshold})"
        )

    if encoding.lower().replace("-", "") in ("utf8", "ascii"):
        return file_path, False

    logger.info(
        "Converting CSV to temporary UTF-8 file",
        extra={
            "file": file_path,
            "detected_encoding": encoding,
            "confidence": confidence,
        },
    )
    tmp = tempfile.NamedTemporaryFile(
        mode="w", encoding="utf-8", suffix=".csv", delete=False
    )
    with open(file_path, encoding=encoding, errors="replace") as src, tmp:
        shutil.copyfileobj(src, tmp)
    return tmp.name, True


def _read_cells(path: str) -> list[tuple[str | None, ...]]:
    conn = duckdb.connect()
    try:
        return conn.execute(
            "SELECT * FROM read_csv(?, header=false, all_varchar=true, "
            "null_padding=true, delim=',')",
            [path],
        ).fetchall()
    finally:
        conn.close()


def _to_float(raw: str | None, path: str, row: int, column: int) -> float:
    if raw is None or not raw.strip():
        raise CsvParseError(path, row, column, raw)
    try:
        value = float(raw)
    except ValueError as e:
        raise CsvParseError(path, row, column, raw) from e
    if not np.isfinite(value):
        raise CsvParseError(path, row, column, raw)
    return value


def load_csv(
    path: str | Path,
    layout: CsvLayout = CsvLayout.ROWS,
    header: bool = False,
    confidence_threshold: float = 0.8,
) -> FloatArray:
    """Read a numeric CSV file.

    ``rows`` layout returns an (N, L) matrix with one series per row;
    ``column`` layout returns the single column as a 1-D series of length L.
    """
    file_path = str(path)
    src = Path(file_path)
    if not src.is_file():
        raise DataError(f"CSV file not found: {file_path}")
    if src.stat().st_size == 0:
        raise DataError(f"CSV file is empty: {file_path}")

    resolved, is_tmp = _resolve_csv_path(file_path, confidence_threshold)
    try:
        rows = _read_cells(resolved)
    except duckdb.Error as e:
        logger.error("CSV read failed", extra={"file": file_path, "error": str(e)})
        raise DataError(f"cannot read CSV {file_path}: {e}") from e
    finally:
        if is_tmp:
            Path(resolved).unlink(missing_ok=True)

    first_row = 1
    if header and rows:
        rows = rows[1:]
        first_row = 2
    if not rows:
        raise DataError(f"CSV file has no data rows: {file_path}")

    values = np.array(
        [
            [
                _to_float(raw, file_path, first_row + r, c + 1)
                for c, raw in enumerate(cells)
            ]
            for r, cells in enumerate(rows)
        ],
        dtype=np.float64,
    )
    logger.info(
        "CSV loaded",
        extra={"file": file_path, "layout": layout.value, "shape": list(values.shape)},
    )
    if layout is CsvLayout.COLUMN:
        if values.shape[1] != 1:
            raise DataError(
                f"column layout expects one column, "
                f"found {values.shape[1]} in {file_path}"
            )
        return values[:, 0]
    return values
