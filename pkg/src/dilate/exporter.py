"""Write numeric tables to CSV through DuckDB and JSON sidecars.

Rows are staged in an in-memory DuckDB table and written with DuckDB's COPY
statement.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import duckdb
import numpy as np
from pydantic import TypeAdapter

from .dataset import DataSplits
from .logger import get_logger
from .synthetic import SyntheticSpec

logger = get_logger(__name__)

_IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _quote_identifier(name: str) -> str:
    """Double-quote a column name after checking it is a plain identifier."""
    if not _IDENTIFIER_RE.fullmatch(name):
        raise ValueError(f"Invalid column name: {name!r}")
    return f'"{name}"'


def _escape_string_literal(value: str) -> str:
    """Escape single quotes for use in a SQL string literal."""
    return value.replace("'", "''")


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Sequence[Sequence[float]],
    header: bool = True,
) -> Path:
    """Write rows of numbers to ``path`` as CSV with full float precision."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    col_defs = ", ".join(f"{_quote_identifier(c)} DOUBLE" for c in columns)
    placeholders = ", ".join("?" for _ in columns)
    escaped = _escape_string_literal(str(out.resolve()))
    conn = duckdb.connect()
    try:
        conn.execute(f"CREATE TABLE export_rows ({col_defs})")
        if rows:
            conn.executemany(
                f"INSERT INTO export_rows VALUES ({placeholders})",
                [[float(v) for v in row] for row in rows],
            )
        conn.execute(
            f"COPY export_rows TO '{escaped}' "
            f"(FORMAT csv, HEADER {'true' if header else 'false'})"
        )
    finally:
        conn.close()
    return out


def write_json(path: str | Path, payload: object, payload_type: Any = None) -> Path:
    """Serialize ``payload`` (dataclasses, pydantic models, dicts) as JSON.

    ``payload_type`` is needed for generic containers such as ``list[Run]``.
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    adapter = TypeAdapter(payload_type if payload_type is not None else type(payload))
    out.write_bytes(adapter.dump_json(payload, indent=2))
    return out


def save_synthetic(
    splits: DataSplits, spec: SyntheticSpec, out_dir: str | Path
) -> list[Path]:
    """Write train/valid/test CSVs (inputs then targets per row) and a sidecar."""
    base = Path(out_dir)
    paths: list[Path] = []
    steps: dict[str, list[int]] = {}
    peaks: dict[str, list[list[int]]] = {}
    for data in splits:
        matrix = np.hstack([data.inputs, data.targets])
        columns = [f"x{i}" for i in range(data.input_len)] + [
            f"y{i}" for i in range(data.horizon)
        ]
        name = data.split.value
        paths.append(
            write_csv(base / f"{name}.csv", columns, matrix.tolist(), header=False)
        )
        steps[name] = list(data.step_indices or ())
        peaks[name] = [list(p) for p in data.peak_positions or ()]
    sidecar = {
        "seed": spec.seed,
        "spec": spec.model_dump(),
        "constraint": "1 <= i1 < i2 <= input_len; step strictly inside the target",
        "step_indices": steps,
        "peak_positions": peaks,
    }
    paths.append(write_json(base / "synthetic.json", sidecar, dict[str, Any]))
    logger.info(
        "Synthetic dataset written", extra={"out_dir": str(base), "files": len(paths)}
    )
    return paths
