"""Write experiment, sweep, training and benchmark reports.

Every report is written twice: a JSON document with full float precision
(serialized through a pydantic TypeAdapter) and an aligned text table
rendered from a Jinja2 template. Sweeps additionally get a plot-ready CSV.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from jinja2 import Environment, FileSystemLoader

from .bench import BenchReport
from .errors import UsageError
from .exporter import write_csv, write_json
from .metrics import METRIC_NAMES, MetricsReport
from .status import RunStatus

# Text tables scale metrics the way forecasting result tables usually print them.
TEXT_SCALES = {"mse": 100.0, "dtw": 100.0, "tdi": 10.0, "ramp": 1.0, "hausdorff": 1.0}


@dataclass
class RunArtifact:
    """Outcome of one training or evaluation run."""

    label: str
    loss: str
    run_index: int
    seed: int | None
    status: RunStatus
    metrics: dict[str, float] = field(default_factory=dict)
    checkpoint: str | None = None
    epochs: int = 0
    best_epoch: int = -1
    train_seconds: float = 0.0
    eval_seconds: float = 0.0
    message: str = ""


@dataclass
class ExperimentReport:
    """Runs of one or two loss configurations and their aggregate metrics."""

    command: str
    labels: list[str]
    dataset: dict[str, Any]
    artifacts: list[RunArtifact]
    metrics: MetricsReport


@dataclass
class SweepRow:
    alpha: float
    metrics: dict[str, float]
    std: dict[str, float]
    runs: int


@dataclass
class SweepResult:
    loss: str
    dataset: dict[str, Any]
    rows: list[SweepRow]
    artifacts: list[RunArtifact]


def _environment() -> Environment:
    template_dir = Path(__file__).parent / "templates"
    return Environment(
        loader=FileSystemLoader(str(template_dir)),
        autoescape=False,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )


def _write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot write report {path}: {e}") from e
    return path


def _write_json(path: Path, payload: object, payload_type: Any = None) -> Path:
    try:
        return write_json(path, payload, payload_type)
    except OSError as e:
        raise UsageError(f"cannot write report {path}: {e}") from e


def _scaled_name(name: str) -> str:
    scale = TEXT_SCALES[name]
    return name if scale == 1.0 else f"{name} (x{scale:g})"


def _metric_table(report: ExperimentReport) -> list[list[str]]:
    labels = [label for label in report.labels if label in report.metrics.summaries]
    header = ["metric", *labels]
    if report.metrics.significance:
        header.append("significant")
    rows = [header]
    for name in METRIC_NAMES:
        scale = TEXT_SCALES[name]
        row = [_scaled_name(name)]
        for label in labels:
            s = report.metrics.summaries[label][name]
            row.append(f"{s.mean * scale:.3f} +/- {s.std * scale:.3f}")
        if report.metrics.significance:
            test = report.metrics.significance[name]
            row.append(f"{'yes' if test.significant else 'no'} (p={test.p_value:.3g})")
        rows.append(row)
    return rows


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return [
        "  ".join(cell.ljust(w) for cell, w in zip(r, widths, strict=True)).rstrip()
        for r in rows
    ]


def emit_report(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Write ``report.json`` and ``report.txt`` for an experiment."""
    if not report.artifacts:
        raise UsageError("no runs to report")
    base = Path(out_dir)
    lines = _align(_metric_table(report)) if report.metrics.summaries else []
    text = _environment().get_template("report.txt.j2").render(
        report=report,
        table=lines,
        diverged=[a for a in report.artifacts if a.status is RunStatus.DIVERGED],
    )
    return [
        _write_json(base / "report.json", report),
        _write_text(base / "report.txt", text),
    ]


def emit_train(artifacts: list[RunArtifact], out_dir: str | Path) -> list[Path]:
    """Write ``train.json`` listing runs and their checkpoints."""
    if not artifacts:
        raise UsageError("no runs to report")
    return [_write_json(Path(out_dir) / "train.json", artifacts, list[RunArtifact])]


def emit_sweep(sweep: SweepResult, out_dir: str | Path) -> list[Path]:
    """Write ``sweep.csv`` with metric means per alpha, plus JSON and text."""
    if not sweep.rows:
        raise UsageError("no sweep results to report")
    base = Path(out_dir)
    columns = ["alpha", *METRIC_NAMES, *(f"{m}_std" for m in METRIC_NAMES)]
    values = [
        [
            row.alpha,
            *(row.metrics[m] for m in METRIC_NAMES),
            *(row.std[m] for m in METRIC_NAMES),
        ]
        for row in sweep.rows
    ]
    try:
        csv_path = write_csv(base / "sweep.csv", columns, values)
    except OSError as e:
        raise UsageError(f"cannot write report {base / 'sweep.csv'}: {e}") from e
    table = [["alpha", *(_scaled_name(m) for m in METRIC_NAMES)]]
    for row in sweep.rows:
        cells = (f"{row.metrics[m] * TEXT_SCALES[m]:.3f}" for m in METRIC_NAMES)
        table.append([f"{row.alpha:g}", *cells])
    template = _environment().get_template("sweep.txt.j2")
    text = template.render(sweep=sweep, table=_align(table))
    return [
        csv_path,
        _write_json(base / "sweep.json", sweep),
        _write_text(base / "sweep.txt", text),
    ]


def emit_bench(bench: BenchReport, out_dir: str | Path) -> list[Path]:
    """Write ``bench.json`` and ``bench.txt``."""
    base = Path(out_dir)
    table = [["k", "forward (s)", "grad (s)", "jvp (s)"]]
    for t in bench.timings:
        table.append([str(t.k), f"{t.forward:.3e}", f"{t.grad:.3e}", f"{t.jvp:.3e}"])
    template = _environment().get_template("bench.txt.j2")
    text = template.render(bench=bench, table=_align(table))
    return [
        _write_json(base / "bench.json", bench),
        _write_text(base / "bench.txt", text),
    ]
