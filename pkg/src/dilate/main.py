"""Experiment orchestration for the dilate CLI.

Coordinates the workflow behind each subcommand: dataset preparation,
seeded multi-run training, evaluation with every metric, significance tests
between two losses, alpha sweeps and report emission.
"""

from __future__ import annotations

import os
import time
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .bench import BenchReport, bench_kernels
from .config import ExperimentConfig
from .dataset import DataSplits, dataset_from_long_series, dataset_from_rows
from .errors import DataError, TrainingDivergedError, TrainingError, UsageError
from .exporter import save_synthetic
from .loader import load_csv
from .logger import get_logger
from .metrics import METRIC_NAMES, aggregate_runs, evaluate_forecasts, summarize
from .models import init_mlp, load_checkpoint, predict, save_checkpoint, train
from .reporter import (
    ExperimentReport,
    RunArtifact,
    SweepResult,
    SweepRow,
    emit_bench,
    emit_report,
    emit_sweep,
    emit_train,
)
from .status import CsvLayout, DatasetKind, LossKind, RunStatus
from .synthetic import generate_synthetic

logger = get_logger(__name__)


def _validate_output_dir(out: str | Path) -> Path:
    """Ensure the output directory exists and is writable, creating it as needed."""
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise UsageError(f"cannot create output directory {path}: {e}") from e
    if not os.access(path, os.W_OK):
        raise UsageError(f"output directory is not writable: {path}")
    return path


def load_experiment_data(config: ExperimentConfig) -> DataSplits:
    """Generate the synthetic benchmark or assemble splits from a CSV file."""
    if config.dataset is DatasetKind.SYNTHETIC:
        return generate_synthetic(config.synthetic)
    assert config.csv_path is not None
    raw = load_csv(
        config.csv_path,
        config.csv_layout,
        header=config.csv_header,
        confidence_threshold=config.encoding_confidence_threshold,
    )
    input_len, horizon = config.window
    if config.csv_layout is CsvLayout.ROWS:
        splits = dataset_from_rows(
            raw, input_len, horizon, config.split_fractions, source=config.csv_path
        )
    else:
        splits = dataset_from_long_series(
            raw,
            input_len,
            horizon,
            config.stride,
            config.split_fractions,
            source=config.csv_path,
        )
    logger.info(
        "CSV dataset prepared",
        extra={
            "file": config.csv_path,
            "train": len(splits.train),
            "valid": len(splits.valid),
            "test": len(splits.test),
        },
    )
    return splits


def _dataset_metadata(config: ExperimentConfig) -> dict[str, Any]:
    input_len, horizon = config.window
    meta: dict[str, Any] = {
        "dataset": config.dataset.value,
        "input_len": input_len,
        "horizon": horizon,
        "model_seeds": f"{config.seed} + run index",
    }
    if config.dataset is DatasetKind.SYNTHETIC:
        meta["dataset_seed"] = config.synthetic.seed
        meta["n_series"] = config.synthetic.n_series
        meta["noise_variance"] = config.synthetic.noise_variance
    else:
        meta["csv_path"] = config.csv_path
        meta["csv_layout"] = config.csv_layout.value
    return meta


def _run_once(
    splits: DataSplits,
    config: ExperimentConfig,
    loss: LossKind,
    run_index: int,
    label: str,
    alpha: float | None = None,
    checkpoint_dir: Path | None = None,
) -> RunArtifact:
    """Train one model, evaluate it on the test split and optionally save it."""
    seed = config.seed + run_index
    train_config = config.train_config(loss, seed, alpha)
    input_len, horizon = config.window
    params = init_mlp(input_len, horizon, config.hidden_size, seed)
    run_fields = {"label": label, "seed": seed, "run_index": run_index}
    logger.info("Run started", extra={**run_fields, "loss": loss.value})
    start = time.perf_counter()
    try:
        best, trace = train(params, splits.train, splits.valid, train_config)
    except TrainingDivergedError as e:
        logger.warning("Run diverged", extra={**run_fields, "error": str(e)})
        return RunArtifact(
            label=label,
            loss=loss.value,
            run_index=run_index,
            seed=seed,
            status=RunStatus.DIVERGED,
            train_seconds=time.perf_counter() - start,
            message=str(e),
        )
    train_seconds = time.perf_counter() - start

    start = time.perf_counter()
    metrics = evaluate_forecasts(predict(best, splits.test.inputs), splits.test.targets)
    eval_seconds = time.perf_counter() - start

    checkpoint = None
    if checkpoint_dir is not None:
        name = f"{label}-run{run_index}.json".replace("=", "")
        checkpoint = str(save_checkpoint(best, checkpoint_dir / name))
    logger.info(
        "Run finished",
        extra={"label": label, "seed": seed, "run_index": run_index, **metrics},
    )
    return RunArtifact(
        label=label,
        loss=loss.value,
        run_index=run_index,
        seed=seed,
        status=RunStatus.OK,
        metrics=metrics,
        checkpoint=checkpoint,
        epochs=len(trace.train_loss),
        best_epoch=trace.best_epoch,
        train_seconds=train_seconds,
        eval_seconds=eval_seconds,
    )


def _ok_metrics(
    artifacts: Sequence[RunArtifact], label: str
) -> list[dict[str, float]]:
    return [
        a.metrics
        for a in artifacts
        if a.label == label and a.status is RunStatus.OK
    ]


def train_runs(config: ExperimentConfig) -> list[RunArtifact]:
    """Train ``config.runs`` models with the selected loss and save checkpoints.

    Raises TrainingError when every run diverges.
    """
    out = _validate_output_dir(config.out)
    splits = load_experiment_data(config)
    artifacts = [
        _run_once(
            splits,
            config,
            config.loss,
            i,
            config.loss.value,
            checkpoint_dir=out / "checkpoints",
        )
        for i in range(config.runs)
    ]
    emit_train(artifacts, out)
    if all(a.status is RunStatus.DIVERGED for a in artifacts):
        raise TrainingError(f"all {len(artifacts)} runs diverged")
    return artifacts


def run_experiment(
    config: ExperimentConfig, compare_with: LossKind | None = None
) -> ExperimentReport:
    """Train and evaluate ``config.runs`` models per loss and aggregate them.

    With ``compare_with`` both losses share the dataset and the model seeds,
    and each metric gets a Welch t-test. Diverged runs are reported but left
    out of the aggregates.
    """
    if compare_with is not None and compare_with is config.loss:
        raise UsageError(f"cannot compare loss {config.loss.value!r} with itself")
    out = _validate_output_dir(config.out)
    splits = load_experiment_data(config)
    losses = [config.loss] if compare_with is None else [config.loss, compare_with]
    labels = [loss.value for loss in losses]

    artifacts = [
        _run_once(splits, config, loss, i, loss.value)
        for loss in losses
        for i in range(config.runs)
    ]
    per_label = {label: _ok_metrics(artifacts, label) for label in labels}
    compare = (labels[0], labels[1]) if compare_with is not None else None
    metrics = aggregate_runs(per_label, compare)
    if compare is None and config.runs == 1:
        metrics.notices.append("single run: standard deviations are 0")
    report = ExperimentReport(
        command="compare" if compare_with is not None else "experiment",
        labels=labels,
        dataset=_dataset_metadata(config),
        artifacts=artifacts,
        metrics=metrics,
    )
    paths = emit_report(report, out)
    logger.info("Report written", extra={"paths": [str(p) for p in paths]})
    return report


def evaluate_checkpoints(
    config: ExperimentConfig, paths: Sequence[str | Path]
) -> ExperimentReport:
    """Evaluate saved models on the test split of the configured dataset."""
    if not paths:
        raise UsageError("no checkpoints given")
    out = _validate_output_dir(config.out)
    splits = load_experiment_data(config)
    label = "checkpoint"
    artifacts = []
    for i, path in enumerate(paths):
        params = load_checkpoint(path)
        if (params.input_len, params.horizon) != config.window:
            raise DataError(
                f"checkpoint {path} expects windows "
                f"{params.input_len}/{params.horizon}, "
                f"dataset has {config.window[0]}/{config.window[1]}"
            )
        start = time.perf_counter()
        metrics = evaluate_forecasts(
            predict(params, splits.test.inputs), splits.test.targets
        )
        artifacts.append(
            RunArtifact(
                label=label,
                loss="unknown",
                run_index=i,
                seed=None,
                status=RunStatus.OK,
                metrics=metrics,
                checkpoint=str(path),
                eval_seconds=time.perf_counter() - start,
            )
        )
    report = ExperimentReport(
        command="evaluate",
        labels=[label],
        dataset=_dataset_metadata(config),
        artifacts=artifacts,
        metrics=aggregate_runs({label: _ok_metrics(artifacts, label)}),
    )
    emit_report(report, out)
    return report


def sweep_alpha(config: ExperimentConfig, alphas: Sequence[float]) -> SweepResult:
    """One training and evaluation per alpha per run, for a DILATE-family loss."""
    if config.loss in (LossKind.MSE, LossKind.DTW):
        raise UsageError(f"alpha has no effect on loss {config.loss.value!r}")
    if not alphas or any(not 0.0 <= a <= 1.0 for a in alphas):
        raise UsageError(f"alphas must be a non-empty subset of [0, 1]: {list(alphas)}")
    out = _validate_output_dir(config.out)
    splits = load_experiment_data(config)
    rows: list[SweepRow] = []
    artifacts: list[RunArtifact] = []
    for alpha in alphas:
        label = f"alpha={alpha:g}"
        runs = [
            _run_once(splits, config, config.loss, i, label, alpha=alpha)
            for i in range(config.runs)
        ]
        artifacts.extend(runs)
        ok = _ok_metrics(runs, label)
        if not ok:
            logger.warning("Every run diverged", extra={"alpha": alpha})
            continue
        summaries = {m: summarize([r[m] for r in ok]) for m in METRIC_NAMES}
        rows.append(
            SweepRow(
                alpha=alpha,
                metrics={m: s.mean for m, s in summaries.items()},
                std={m: s.std for m, s in summaries.items()},
                runs=len(ok),
            )
        )
    if not rows:
        raise TrainingError("every run of the sweep diverged")
    sweep = SweepResult(
        loss=config.loss.value,
        dataset=_dataset_metadata(config),
        rows=rows,
        artifacts=artifacts,
    )
    emit_sweep(sweep, out)
    return sweep


def generate(config: ExperimentConfig) -> list[Path]:
    """Write the synthetic benchmark to the output directory."""
    out = _validate_output_dir(config.out)
    return save_synthetic(generate_synthetic(config.synthetic), config.synthetic, out)


def run_bench(
    out: str | Path, k_values: Sequence[int], repeats: int, seed: int
) -> BenchReport:
    """Benchmark the kernels and write the timing report."""
    base = _validate_output_dir(out)
    report = bench_kernels(k_values, repeats=repeats, seed=seed)
    emit_bench(report, base)
    return report
