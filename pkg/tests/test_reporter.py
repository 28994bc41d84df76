"""Tests for report emission."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from dilate.bench import BenchReport, KernelTiming
from dilate.errors import UsageError
from dilate.loader import load_csv
from dilate.metrics import METRIC_NAMES, aggregate_runs
from dilate.reporter import (
    ExperimentReport,
    RunArtifact,
    SweepResult,
    SweepRow,
    emit_bench,
    emit_report,
    emit_sweep,
    emit_train,
)
from dilate.status import RunStatus


def _artifact(label: str, index: int, value: float) -> RunArtifact:
    return RunArtifact(
        label=label,
        loss=label,
        run_index=index,
        seed=index,
        status=RunStatus.OK,
        metrics=dict.fromkeys(METRIC_NAMES, value),
        epochs=3,
        best_epoch=1,
    )


def _compare_report() -> ExperimentReport:
    artifacts = [
        _artifact("dilate", 0, 0.10),
        _artifact("dilate", 1, 0.12),
        _artifact("mse", 0, 0.30),
        _artifact("mse", 1, 0.31),
        RunArtifact(
            label="mse",
            loss="mse",
            run_index=2,
            seed=2,
            status=RunStatus.DIVERGED,
            message="non-finite training loss at epoch 4",
        ),
    ]
    per_label = {
        label: [a.metrics for a in artifacts if a.label == label and a.metrics]
        for label in ("dilate", "mse")
    }
    return ExperimentReport(
        command="compare",
        labels=["dilate", "mse"],
        dataset={"dataset": "synthetic", "dataset_seed": 0},
        artifacts=artifacts,
        metrics=aggregate_runs(per_label, ("dilate", "mse")),
    )


class TestEmitReport:
    """Tests for emit_report."""

    def test_writes_json_and_text(self, tmp_path: Path) -> None:
        """Both files are written and agree on the aggregates."""
        paths = emit_report(_compare_report(), tmp_path)
        assert [p.name for p in paths] == ["report.json", "report.txt"]

        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["command"] == "compare"
        summaries = doc["metrics"]["summaries"]
        assert summaries["dilate"]["mse"]["mean"] == pytest.approx(0.11)
        assert set(doc["metrics"]["significance"]) == set(METRIC_NAMES)
        assert doc["artifacts"][4]["status"] == "DIVERGED"

        text = (tmp_path / "report.txt").read_text()
        assert "losses: dilate, mse" in text
        assert "mse (x100)" in text
        assert "tdi (x10)" in text
        assert "11.000 +/- 1.414" in text
        assert "significant" in text
        assert "mse run 2 seed 2: non-finite training loss" in text

    def test_notices_are_listed(self, tmp_path: Path) -> None:
        """Aggregation notices appear in the text report."""
        report = _compare_report()
        report.metrics.notices.append("single run: standard deviations are 0")
        emit_report(report, tmp_path)
        assert "single run" in (tmp_path / "report.txt").read_text()

    def test_no_completed_runs(self, tmp_path: Path) -> None:
        """A report of only diverged runs says so."""
        report = _compare_report()
        report.artifacts = report.artifacts[4:]
        report.metrics = aggregate_runs({"mse": []})
        emit_report(report, tmp_path)
        assert "no completed runs" in (tmp_path / "report.txt").read_text()

    def test_empty_report(self, tmp_path: Path) -> None:
        """A report without runs is a usage error."""
        report = _compare_report()
        report.artifacts = []
        with pytest.raises(UsageError):
            emit_report(report, tmp_path)

    def test_unwritable_destination(self, tmp_path: Path) -> None:
        """A destination that is a file is reported as a usage error."""
        blocker = tmp_path / "taken"
        blocker.write_text("")
        with pytest.raises(UsageError, match="cannot write report"):
            emit_report(_compare_report(), blocker)


class TestEmitOthers:
    """Tests for the train, sweep and bench reports."""

    def test_train(self, tmp_path: Path) -> None:
        """train.json lists every run."""
        emit_train([_artifact("dtw", 0, 1.0), _artifact("dtw", 1, 2.0)], tmp_path)
        doc = json.loads((tmp_path / "train.json").read_text())
        assert [run["run_index"] for run in doc] == [0, 1]
        assert doc[0]["status"] == "OK"

    def test_sweep(self, tmp_path: Path) -> None:
        """The sweep CSV has one row per alpha with means then deviations."""
        rows = [
            SweepRow(
                alpha=a,
                metrics=dict.fromkeys(METRIC_NAMES, a),
                std=dict.fromkeys(METRIC_NAMES, 0.0),
                runs=2,
            )
            for a in (0.0, 0.5, 1.0)
        ]
        sweep = SweepResult(loss="dilate", dataset={}, rows=rows, artifacts=[])
        names = [p.name for p in emit_sweep(sweep, tmp_path)]
        assert names == ["sweep.csv", "sweep.json", "sweep.txt"]
        header = (tmp_path / "sweep.csv").read_text().splitlines()[0].split(",")
        assert header[:6] == ["alpha", *METRIC_NAMES]
        assert header[6] == "mse_std"
        values = load_csv(tmp_path / "sweep.csv", header=True)
        assert values.shape == (3, 11)
        assert list(values[:, 0]) == [0.0, 0.5, 1.0]
        assert "dilate alpha sweep" in (tmp_path / "sweep.txt").read_text()

    def test_empty_sweep(self, tmp_path: Path) -> None:
        """A sweep without rows is a usage error."""
        sweep = SweepResult(loss="dilate", dataset={}, rows=[], artifacts=[])
        with pytest.raises(UsageError):
            emit_sweep(sweep, tmp_path)

    def test_bench(self, tmp_path: Path) -> None:
        """The benchmark report carries timings and exponents."""
        bench = BenchReport(
            timings=[
                KernelTiming(8, 1e-5, 2e-5, 3e-5),
                KernelTiming(16, 4e-5, 8e-5, 1e-4),
            ],
            exponents={"forward": 2.0, "grad": 2.0, "jvp": 1.74},
            fd_k=20,
            fd_seconds=0.5,
            analytic_seconds=0.001,
            speedup=500.0,
            repeats=3,
            gamma=0.1,
        )
        emit_bench(bench, tmp_path)
        doc = json.loads((tmp_path / "bench.json").read_text())
        assert doc["timings"][1]["k"] == 16
        text = (tmp_path / "bench.txt").read_text()
        assert "scaling exponent: forward 2.00, grad 2.00, jvp 1.74" in text
        assert "speedup: 500.0x" in text
