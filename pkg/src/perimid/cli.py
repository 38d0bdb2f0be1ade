"""Command-line front end: every pipeline as a subcommand with a JSON report."""

import argparse
import logging
import sys
from collections.abc import Sequence
from typing import Any, NoReturn

import pandas as pd

from .config.store import RunConfig, load_run_config, log_level
from .errors import ConfigurationError
from .model.network import AGGREGATION_MODES, ATTENTION_MODES, PARTITION_MODES
from .tasks.base import SCORE_AGGREGATIONS
from .tasks.registry import list_tasks
from .tools.ablate import ablate, list_variants
from .tools.build_pyramid import build_pyramid
from .tools.detect_periods import detect_periods
from .tools.gradcheck import TOLERANCE, gradcheck
from .tools.pipeline import finish
from .tools.run_task import run_task, train_model
from .tools.sweep import sweep_k, sweep_lookback
from .training.config import LOSSES

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2

# argparse dest -> (RunConfig section, field)
FLAG_FIELDS: dict[str, tuple[str, str]] = {
    "csv": ("data", "csv"),
    "has_header": ("data", "has_header"),
    "time_column": ("data", "time_column"),
    "label_column": ("data", "label_column"),
    "length": ("data", "length"),
    "channels": ("data", "channels"),
    "tones": ("data", "tones"),
    "trend_slope": ("data", "trend_slope"),
    "noise_sigma": ("data", "noise_sigma"),
    "stride": ("data", "stride"),
    "anomalies": ("data", "anomalies"),
    "k": ("model", "k"),
    "d_model": ("model", "d_model"),
    "layers": ("model", "layers"),
    "heads": ("model", "heads"),
    "dropout": ("model", "dropout"),
    "kernel": ("model", "kernel"),
    "attention": ("model", "attention"),
    "aggregation": ("model", "aggregation"),
    "partition": ("model", "partition"),
    "freeze_periods": ("model", "freeze_periods"),
    "lr": ("train", "lr"),
    "epochs": ("train", "epochs"),
    "batch_size": ("train", "batch_size"),
    "max_steps": ("train", "max_steps"),
    "loss": ("train", "loss"),
    "seed": ("train", "seed"),
    "task": ("task", "kind"),
    "input_len": ("task", "input_len"),
    "target_len": ("task", "target_len"),
    "num_classes": ("task", "num_classes"),
    "mask_ratio": ("task", "mask_ratio"),
    "threshold_quantile": ("task", "threshold_quantile"),
    "score_agg": ("task", "score_agg"),
    "pre_interpolation": ("task", "pre_interpolation"),
    "seasonality": ("task", "seasonality"),
    "out": ("output", "out"),
    "checkpoint": ("output", "checkpoint"),
    "loss_curve": ("output", "loss_curve"),
    "plot": ("output", "plot"),
}

TASK_COMMANDS = ("forecast", "impute", "anomaly", "classify")


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="JSON report path")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return common


def _run_parser() -> argparse.ArgumentParser:
    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--config", help="INI file with [model] [train] [task] [data] [output]")

    data = run.add_argument_group("data")
    data.add_argument(
        "--csv",
        help="Input CSV (one numeric column per channel); classify always generates its data",
    )
    data.add_argument("--no-header", dest="has_header", action="store_const", const=False)
    data.add_argument(
        "--time-column", help="Column to drop (name; 0-based index with --no-header)"
    )
    data.add_argument("--label-column", help="Anomaly label column")
    data.add_argument("--length", type=int, help="Synthetic series length")
    data.add_argument("--channels", type=int, help="Synthetic channel count")
    data.add_argument("--tones", help="Synthetic tones 'freq:amp:phase, ...'")
    data.add_argument("--trend-slope", type=float)
    data.add_argument("--noise-sigma", type=float)
    data.add_argument("--anomalies", type=int, help="Synthetic anomalies in the test split")
    data.add_argument("--stride", type=int)

    model = run.add_argument_group("model")
    model.add_argument("--k", type=int, help="Pyramid levels")
    model.add_argument("--d-model", type=int)
    model.add_argument("--layers", type=int)
    model.add_argument("--heads", type=int)
    model.add_argument("--dropout", type=float)
    model.add_argument("--kernel", type=int, help="Moving-average kernel (odd)")
    model.add_argument("--attention", choices=ATTENTION_MODES)
    model.add_argument("--aggregation", choices=AGGREGATION_MODES)
    model.add_argument("--partition", choices=PARTITION_MODES)
    model.add_argument("--freeze-periods", action="store_const", const=True)

    train = run.add_argument_group("training")
    train.add_argument("--lr", type=float)
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--max-steps", type=int)
    train.add_argument("--loss", choices=LOSSES)

    task = run.add_argument_group("task")
    task.add_argument("--input-len", type=int, help="Look-back window L")
    task.add_argument("--target-len", type=int, help="Forecast horizon T")
    task.add_argument("--num-classes", type=int)
    task.add_argument("--mask-ratio", type=float)
    task.add_argument("--threshold-quantile", type=float)
    task.add_argument("--score-agg", choices=SCORE_AGGREGATIONS)
    task.add_argument(
        "--no-pre-interpolation", dest="pre_interpolation", action="store_const", const=False
    )
    task.add_argument("--seasonality", type=int, help="Season length for SMAPE/MASE/OWA")

    output = run.add_argument_group("output")
    output.add_argument("--checkpoint", help="Checkpoint to write (train) or reuse (tasks)")
    output.add_argument("--loss-curve", help="(step, loss) CSV")
    output.add_argument("--plot", help="Plot-ready CSV")
    return run


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(prog="perimid", description="Periodic pyramid time-series models")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common, run = _common_parser(), _run_parser()

    sub = commands.add_parser("detect-periods", parents=[common, run], help="Dominant periods")
    sub.add_argument("--start", type=int, help="Window start (default: whole series)")

    sub = commands.add_parser("build-pyramid", parents=[common, run], help="Pyramid of a window")
    sub.add_argument("--start", type=int, default=0)
    sub.add_argument("--attention-csv", help="Attention weights CSV (needs --checkpoint)")
    sub.add_argument("--mask-csv", help="Attention mask CSV (0/1, one row per token)")

    sub = commands.add_parser("train", parents=[common, run], help="Train a model")
    sub.add_argument("--task", choices=list_tasks())

    for name in TASK_COMMANDS:
        commands.add_parser(name, parents=[common, run], help=f"Train or load, then {name}")

    sub = commands.add_parser("sweep-k", parents=[common, run], help="Metrics across k")
    sub.add_argument("--task", choices=list_tasks())
    sub.add_argument("--k-min", type=int, default=2)
    sub.add_argument("--k-max", type=int, default=5)
    sub.add_argument("--table", help="Per-k CSV")

    sub = commands.add_parser("sweep-lookback", parents=[common, run], help="Metrics across L")
    sub.add_argument("--task", choices=list_tasks())
    sub.add_argument("--lengths", type=_int_list, default=[48, 96, 192])
    sub.add_argument("--table", help="Per-L CSV")

    sub = commands.add_parser("ablate", parents=[common, run], help="Compare model variants")
    sub.add_argument("--task", choices=list_tasks())
    sub.add_argument("--variants", type=lambda s: s.split(","), help=", ".join(list_variants()))
    sub.add_argument("--seeds", type=_int_list, help="Comma-separated training seeds")
    sub.add_argument("--table", help="Per-run CSV")

    sub = commands.add_parser("gradcheck", parents=[common], help="Finite-difference check")
    sub.add_argument("--eps", type=float, default=1e-6)
    sub.add_argument("--tolerance", type=float, default=TOLERANCE)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < --config file < flags; task subcommands fix the task kind."""
    overrides: dict[str, dict[str, Any]] = {}
    for dest, (section, key) in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    if args.command in TASK_COMMANDS:
        overrides.setdefault("task", {})["kind"] = args.command
    return load_run_config(getattr(args, "config", None), overrides)


def dispatch(args: argparse.Namespace) -> dict[str, Any]:
    if args.command == "gradcheck":
        return gradcheck(seed=args.seed or 0, eps=args.eps, tolerance=args.tolerance)

    config = resolve_config(args)
    if args.command == "detect-periods":
        return detect_periods(config, start=args.start)
    if args.command == "build-pyramid":
        return build_pyramid(
            config,
            start=args.start,
            checkpoint=config.output.checkpoint,
            attention_csv=args.attention_csv,
            mask_csv=args.mask_csv,
        )
    if args.command == "train":
        return train_model(config)
    if args.command in TASK_COMMANDS:
        return run_task(config)
    if args.command == "sweep-k":
        return sweep_k(config, args.k_min, args.k_max, args.table)
    if args.command == "sweep-lookback":
        return sweep_lookback(config, args.lengths, args.table)
    if args.command == "ablate":
        return ablate(config, args.variants, args.seeds, args.table)
    return {"success": False, "error": f"Unknown command: {args.command}"}


def summarize(command: str, result: dict[str, Any]) -> str:
    """Human-readable summary of a successful result."""
    lines = [f"{command}: ok"]
    if "periods" in result:
        periods = result["periods"]
        lines.append(f"periods: {periods['periods']} (frequencies {periods['frequencies']})")
    if "n_tokens" in result:
        lines.append(f"tokens: {result['n_tokens']}, feature flows: {result['flow_count']}")
    if "steps" in result:
        lines.append(f"steps: {result['steps']}, final loss: {result['final_loss']:.6g}")
    for name, value in result.get("metrics", {}).items():
        lines.append(f"{name}: {value:.6g}")
    if "rows" in result:
        lines.append(pd.DataFrame(result["rows"]).to_string(index=False))
    if "max_error" in result:
        lines.append(
            f"max relative gradient error: {result['max_error']:.3e} "
            f"(tolerance {result['tolerance']:g})"
        )
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        level = log_level(args.verbose)
    except ConfigurationError as e:
        print(f"perimid: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )

    try:
        result = dispatch(args)
    except ConfigurationError as e:
        # bad values in flags or the config file
        logger.error(str(e))
        print(f"perimid: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    finish(args.command, result, args.out)
    if not result.get("success"):
        logger.error(result.get("error", "failed"))
        if "max_error" in result:
            print(summarize(args.command, result))
        return EXIT_FAILURE
    print(summarize(args.command, result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
