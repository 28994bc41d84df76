"""CLI entry point for dilate."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, NoReturn

from pydantic import ValidationError

from . import __version__
from .errors import DilateError, UsageError
from .logger import configure_log_level, get_logger
from .status import CsvLayout, DatasetKind, LossKind

logger = get_logger(__name__)

_LOSS_CHOICES = [k.value for k in LossKind]


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers: {text}"
        ) from e


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers: {text}"
        ) from e


class _Parser(argparse.ArgumentParser):
    """Argument parser whose errors exit with the usage-error code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, f"{self.prog}: error: {message}\n")


def _output_parser() -> argparse.ArgumentParser:
    output = _Parser(add_help=False)
    output.add_argument("--out", default=None, help="Output directory (default: out)")
    output.add_argument("--seed", type=int, default=None, help="Base random seed")
    output.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Suppress all output except errors",
    )
    return output


def _config_parser() -> argparse.ArgumentParser:
    config = _Parser(add_help=False)
    config.add_argument("--config", default=None, help="YAML or JSON experiment config")
    return config


def _data_parser() -> argparse.ArgumentParser:
    data = _Parser(add_help=False)
    data.add_argument("--dataset", choices=[d.value for d in DatasetKind], default=None)
    data.add_argument("--csv-path", default=None, help="Input CSV for --dataset csv")
    data.add_argument(
        "--csv-layout", choices=[c.value for c in CsvLayout], default=None
    )
    data.add_argument(
        "--csv-header", action="store_true", default=None, help="Skip the first CSV row"
    )
    data.add_argument("--input-len", type=int, default=None)
    data.add_argument("--horizon", type=int, default=None)
    data.add_argument("--stride", type=int, default=None)
    data.add_argument(
        "--data-seed", type=int, default=None, help="Seed of the synthetic generator"
    )
    data.add_argument(
        "--n-series", type=int, default=None, help="Synthetic series per split"
    )
    return data


def _training_parser() -> argparse.ArgumentParser:
    training = _Parser(add_help=False)
    training.add_argument("--loss", choices=_LOSS_CHOICES, default=None)
    training.add_argument("--alpha", type=float, default=None)
    training.add_argument("--gamma", type=float, default=None)
    training.add_argument("--band-width", type=int, default=None)
    training.add_argument("--runs", type=int, default=None)
    training.add_argument("--epochs", type=int, default=None)
    training.add_argument("--patience", type=int, default=None)
    training.add_argument("--batch-size", type=int, default=None)
    training.add_argument("--learning-rate", type=float, default=None)
    training.add_argument("--hidden-size", type=int, default=None)
    return training


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="dilate",
        description="Shape and time distortion losses for multi-step forecasting",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    subparsers = parser.add_subparsers(
        dest="subcommand", required=True, parser_class=_Parser
    )
    output = _output_parser()
    common = [output, _config_parser()]
    data = _data_parser()
    training = _training_parser()

    # generate
    subparsers.add_parser(
        "generate", parents=[*common, data], help="Write the synthetic dataset as CSV"
    )

    # train
    subparsers.add_parser(
        "train",
        parents=[*common, data, training],
        help="Train models and save checkpoints",
    )

    # evaluate
    evaluate_parser = subparsers.add_parser(
        "evaluate", parents=[*common, data], help="Evaluate saved checkpoints"
    )
    evaluate_parser.add_argument("checkpoints", nargs="+", help="Checkpoint JSON files")

    # compare
    compare_parser = subparsers.add_parser(
        "compare",
        parents=[*common, data, training],
        help="Compare two losses with t-tests",
    )
    compare_parser.add_argument(
        "--against",
        choices=_LOSS_CHOICES,
        default=None,
        help="Second loss (default: mse)",
    )

    # sweep-alpha
    sweep_parser = subparsers.add_parser(
        "sweep-alpha",
        parents=[*common, data, training],
        help="Train over a grid of alphas",
    )
    sweep_parser.add_argument(
        "--alphas",
        type=_float_list,
        default=[0.0, 0.25, 0.5, 0.75, 1.0],
        help="Comma-separated alphas (default: 0,0.25,0.5,0.75,1)",
    )

    # bench
    bench_parser = subparsers.add_parser(
        "bench", parents=[output], help="Time the soft-DTW kernels"
    )
    bench_parser.add_argument(
        "--k-values",
        type=_int_list,
        default=[16, 32, 64, 128],
        help="Comma-separated horizons (default: 16,32,64,128)",
    )
    bench_parser.add_argument("--repeats", type=int, default=5)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Explicitly given flags, keyed by ExperimentConfig field."""
    fields = [
        "out",
        "seed",
        "dataset",
        "csv_path",
        "csv_layout",
        "csv_header",
        "input_len",
        "horizon",
        "stride",
        "loss",
        "alpha",
        "gamma",
        "band_width",
        "runs",
        "epochs",
        "patience",
        "batch_size",
        "learning_rate",
        "hidden_size",
    ]
    values = {name: getattr(args, name, None) for name in fields}
    values["compare_loss"] = getattr(args, "against", None)
    synthetic = {
        "seed": getattr(args, "data_seed", None),
        "n_series": getattr(args, "n_series", None),
    }
    if args.subcommand == "generate" and synthetic["seed"] is None:
        synthetic["seed"] = args.seed
    synthetic = {k: v for k, v in synthetic.items() if v is not None}
    values["synthetic"] = synthetic or None
    return values


def _dispatch(args: argparse.Namespace) -> None:
    from .config import build_config
    from .main import (
        evaluate_checkpoints,
        generate,
        run_bench,
        run_experiment,
        sweep_alpha,
        train_runs,
    )

    if args.subcommand == "bench":
        run_bench(
            args.out or "out",
            args.k_values,
            repeats=args.repeats,
            seed=args.seed if args.seed is not None else 0,
        )
        return

    config = build_config(args.config, _overrides(args))
    if args.subcommand == "generate":
        generate(config)
    elif args.subcommand == "train":
        train_runs(config)
    elif args.subcommand == "evaluate":
        evaluate_checkpoints(config, args.checkpoints)
    elif args.subcommand == "compare":
        run_experiment(config, compare_with=LossKind(config.compare_loss))
    elif args.subcommand == "sweep-alpha":
        sweep_alpha(config, args.alphas)
    else:
        raise UsageError(f"unknown subcommand: {args.subcommand}")


def main(argv: list[str] | None = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.quiet:
        configure_log_level(logging.ERROR)

    try:
        _dispatch(args)
    except DilateError as e:
        logger.error(
            "%s", e, extra={"error_type": type(e).__name__, "exit_code": e.exit_code}
        )
        raise SystemExit(e.exit_code) from e
    except ValidationError as e:
        logger.error(
            "Invalid configuration: %s",
            e,
            extra={"error_type": "ValidationError", "exit_code": UsageError.exit_code},
        )
        raise SystemExit(UsageError.exit_code) from e
