"""Command line interface of the laboratory: one subcommand per experiment family plus figure emission, verification and token export."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from lm_memorization.corpus_pipeline.doc_ids import Doc_Id_Mode
from lm_memorization.corpus_pipeline.mlm_masking import MLM_Corruption
from lm_memorization.corpus_pipeline.pos_annotations import export_token_stream
from lm_memorization.experiment_harness.experiment_data import prepare_experiment_data
from lm_memorization.experiment_harness.figure_data import FIGURES, emit_figure_data
from lm_memorization.experiment_harness.forgetting import (
    DEFAULT_INJECTION_FRACTIONS,
    DEFAULT_REPETITIONS,
    DEFAULT_SPACING_PERIODS,
    Forgetting_Study,
    forgetting_baseline_vs_scale,
    order_invariance_study,
    run_forgetting,
    run_repetition_study,
)
from lm_memorization.experiment_harness.Run_Config import Experiment_Kind, Run_Config
from lm_memorization.experiment_harness.sweeps import DEFAULT_DATA_FRACTIONS, Sweep_Result, run_data_size_sweep, run_docid_experiment, run_lr_sweep, run_scaling_sweep
from lm_memorization.experiment_harness.Trainer import run_training
from lm_memorization.experiment_harness.trend_checks import check_trends
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception, LM_Memorization_Exception
from lm_memorization.lm_memorization_logging.memorization_logger import Memorization_Error_Log, Memorization_Warning_Log, Training_Log
from lm_memorization.memorization_metrics.Memorization_History import Crossing_Kind
from lm_memorization.memorization_metrics.thresholds import run_crossing
from lm_memorization.transformer_lm.Transformer_Config import LM_Task, desk_grid
from lm_memorization.verification import run_property_suite

EXIT_FAILED_CHECKS = 1

_CONFIG_FLAGS: dict[str, dict[str, Any]] = {
    "run_id": {"type": str},
    "preset": {"type": str},
    "task": {"choices": [str(task) for task in LM_Task]},
    "tie_embeddings": {"action": argparse.BooleanOptionalAction},
    "train_path": {"type": str},
    "valid_path": {"type": str},
    "annotation_path": {"type": str},
    "seed": {"type": int},
    "max_epochs": {"type": int},
    "max_updates": {"type": int},
    "batch_tokens": {"type": int},
    "learning_rate": {"type": float},
    "eval_every": {"type": int},
    "checkpoint_every": {"type": int},
    "taus": {"type": float, "nargs": "+"},
    "docid_mode": {"choices": [str(mode) for mode in Doc_Id_Mode]},
    "reserve_doc_id_prefix": {"action": argparse.BooleanOptionalAction},
    "inject_epoch": {"type": int},
    "repetitions": {"type": int},
    "spacing_period": {"type": int},
    "vocab_size": {"type": int},
    "min_freq": {"type": int},
    "max_seq_len": {"type": int},
    "mask_probability": {"type": float},
    "mlm_corruption": {"choices": [corruption.value for corruption in MLM_Corruption]},
    "eval_mask_seed": {"type": int},
    "eval_batch_size": {"type": int},
    "track_pos": {"action": argparse.BooleanOptionalAction},
    "track_memory_units": {"action": argparse.BooleanOptionalAction},
    "data_fraction": {"type": float},
    "allow_paper_scale": {"action": argparse.BooleanOptionalAction},
    "reset_schedule_on_injection": {"action": argparse.BooleanOptionalAction},
    "interleave_repetitions": {"action": argparse.BooleanOptionalAction},
    "strict_thresholds": {"action": argparse.BooleanOptionalAction},
    "record_wall_time": {"action": argparse.BooleanOptionalAction},
    "dtype": {"choices": ["float32", "float64"]},
}
_MODEL_FLAGS = ("n_layers", "n_heads", "d_model")


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Add the run configuration flags; every flag defaults to None so that only given flags override the --config file."""
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", type=Path, help="JSON file of run configuration fields")
    group.add_argument("--log-root", dest="log_root", type=str, help="Root of the run directories (overrides LM_MEMORIZATION_LOG_ROOT)")
    for name, options in _CONFIG_FLAGS.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, **options)
    for name in _MODEL_FLAGS:
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int, default=None, help="Explicit architecture; replaces the preset")


def _add_study_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seeds", type=int, nargs="+", help="Seeds to repeat every arm over. Defaults to the configured seed.")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes running independent runs")


def run_config_from_args(args: argparse.Namespace) -> Run_Config:
    """Resolve the run configuration: the --config file first, then every flag given on the command line.

    Args:
        args (argparse.Namespace): Parsed arguments of a run subcommand.

    Returns:
        Run_Config: The validated configuration.

    Raises:
        Config_Exception: If the file cannot be read, a field is invalid, or the explicit architecture is incomplete.
    """
    values: dict[str, Any] = {}
    if args.config is not None:
        values.update(Run_Config.from_json_file(args.config).to_dict())
    for name in (*_CONFIG_FLAGS, "log_root"):
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    model = {name: getattr(args, name) for name in _MODEL_FLAGS if getattr(args, name, None) is not None}
    if model:
        if len(model) != len(_MODEL_FLAGS):
            raise Config_Exception(f"An explicit architecture needs all of {', '.join(_MODEL_FLAGS)}")
        values["model"] = model
        values["preset"] = None
    elif args.preset is not None:
        values["model"] = None
    if args.max_updates is not None and args.max_epochs is None:
        values["max_epochs"] = None
    if args.max_epochs is not None and args.max_updates is None:
        values["max_updates"] = None
    return Run_Config.from_dict(values)


def _report_sweep(result: Sweep_Result, log: Training_Log) -> None:
    for entry, crossing in result.crossings():
        log.print(f"{result.summary.experiment_id} {entry.arm} seed={entry.seed} N={entry.param_count} tau={crossing.tau:g}: {crossing.describe()}")


def _report_study(study: Forgetting_Study, log: Training_Log) -> None:
    for arm, param_count, seed, baseline in study.baseline_table():
        log.print(f"{study.summary.experiment_id} {arm} seed={seed} N={param_count}: baseline={baseline:.4f}")


def _train(args: argparse.Namespace, log: Training_Log, warnings_log: Memorization_Warning_Log) -> int:
    config = run_config_from_args(args)
    history = run_training(config, log, warnings_log)
    for tau in config.taus:
        log.print(f"{config.resolved_run_id} tau={tau:g}: {run_crossing(history, tau, Crossing_Kind.epoch if config.max_epochs is not None else Crossing_Kind.update).describe()}")
    return 0


def _sweep_scale(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    _report_sweep(run_scaling_sweep(run_config_from_args(args), args.presets, args.seeds, args.workers), log)
    return 0


def _sweep_lr(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    _report_sweep(run_lr_sweep(run_config_from_args(args), args.presets, args.learning_rates, args.seeds, args.workers), log)
    return 0


def _sweep_data(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    _report_sweep(run_data_size_sweep(run_config_from_args(args), args.presets, args.fractions, args.seeds, args.workers), log)
    return 0


def _docid(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    _report_sweep(run_docid_experiment(run_config_from_args(args), args.seeds, args.workers), log)
    return 0


def _forget(args: argparse.Namespace, log: Training_Log, warnings_log: Memorization_Warning_Log) -> int:
    config = run_config_from_args(args).with_changes(experiment=Experiment_Kind.forgetting)
    curve = run_forgetting(config, log, warnings_log)
    log.print(f"{curve.run_id}: baseline={curve.baseline:.4f} at epoch {curve.baseline_epoch}")
    return 0


def _forget_scale(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    _report_study(forgetting_baseline_vs_scale(run_config_from_args(args), args.presets, args.seeds, args.workers), log)
    return 0


def _repetition(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    _report_study(run_repetition_study(run_config_from_args(args), args.repetition_counts, args.periods, args.seeds, args.workers), log)
    return 0


def _order_invariance(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    result = order_invariance_study(run_config_from_args(args), args.fractions, args.seeds, args.workers)
    _report_study(result.study, log)
    log.print(f"{result.study.summary.experiment_id}: baseline spread={result.spread():.4f}")
    return 0


def _emit_figures(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    for figure, path in emit_figure_data(args.log_root, args.output_dir, args.figures).items():
        log.print(f"{figure}: {path}")
    return 0


def _verify(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    passed = True
    for result in run_property_suite():
        log.print(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
        passed = passed and result.passed
    if args.trends is not None:
        for trend in check_trends(args.trends):
            log.print(f"{str(trend.status).upper()} [{trend.criterion}] {trend.name}: {trend.detail}")
            passed = passed and trend.passed
    return 0 if passed else EXIT_FAILED_CHECKS


def _export_tokens(args: argparse.Namespace, log: Training_Log, _warnings_log: Memorization_Warning_Log) -> int:
    config = run_config_from_args(args).with_changes(annotation_path=None, data_fraction=1.0, docid_mode=Doc_Id_Mode.control)
    path = export_token_stream(prepare_experiment_data(config).train, args.output)
    log.print(f"token stream written to {path}")
    return 0


Command = Callable[[argparse.Namespace, Training_Log, Memorization_Warning_Log], int]


def build_parser() -> argparse.ArgumentParser:
    """
    Returns:
        argparse.ArgumentParser: The parser of every subcommand.
    """
    parser = argparse.ArgumentParser(prog="lm-memorization", description="Train small transformer language models and measure how they memorize and forget their training data.")
    parser.add_argument("--quiet", action="store_true", help="Silence progress output")
    commands = parser.add_subparsers(dest="command", required=True)

    def _command(name: str, handler: Command, help_text: str, run_config: bool = True) -> argparse.ArgumentParser:
        command = commands.add_parser(name, help=help_text)
        command.set_defaults(handler=handler)
        if run_config:
            _add_config_arguments(command)
        return command

    _command("train", _train, "Train one run and report its threshold crossings")

    for name, handler, help_text in (("sweep-scale", _sweep_scale, "Epochs to each threshold across model sizes"), ("forget-scale", _forget_scale, "Forgetting baseline across model sizes")):
        command = _command(name, handler, help_text)
        command.add_argument("--presets", nargs="+", default=desk_grid(), help="Model presets, smallest first")
        _add_study_arguments(command)

    command = _command("sweep-lr", _sweep_lr, "Epochs to memorize 90%% across learning rates")
    command.add_argument("--presets", nargs="+", default=desk_grid(), help="Model presets, smallest first")
    command.add_argument("--learning-rates", dest="learning_rates", type=float, nargs="+", required=True, help="Grid spanning at least one order of magnitude")
    _add_study_arguments(command)

    command = _command("sweep-data", _sweep_data, "Epochs to each threshold across training set fractions")
    command.add_argument("--presets", nargs="+", default=desk_grid(), help="Model presets, smallest first")
    command.add_argument("--fractions", type=float, nargs="+", default=list(DEFAULT_DATA_FRACTIONS), help="Fractions of the training documents")
    _add_study_arguments(command)

    command = _command("docid", _docid, "Control, vocab-only and prepend unique identifier arms")
    _add_study_arguments(command)

    _command("forget", _forget, "Inject the special batch into one run and track its forgetting")

    command = _command("repetition", _repetition, "Repeated against spaced injections of the special batch")
    command.add_argument("--repetition-counts", dest="repetition_counts", type=int, nargs="+", default=list(DEFAULT_REPETITIONS), help="Consecutive passes per injection")
    command.add_argument("--periods", type=int, nargs="+", default=list(DEFAULT_SPACING_PERIODS), help="Epochs between spaced injections")
    _add_study_arguments(command)

    command = _command("order-invariance", _order_invariance, "Forgetting baselines of injections at different points of training")
    command.add_argument("--fractions", type=float, nargs="+", default=list(DEFAULT_INJECTION_FRACTIONS), help="Injection points as fractions of the epoch budget")
    _add_study_arguments(command)

    command = _command("emit-figures", _emit_figures, "Write the figure CSV tables of the completed experiments", run_config=False)
    command.add_argument("--log-root", dest="log_root", type=Path, required=True, help="Root of the run directories")
    command.add_argument("--output-dir", dest="output_dir", type=Path, help="Destination of the CSV files. Defaults to <log-root>/figures")
    command.add_argument("--figures", nargs="+", choices=sorted(FIGURES), help="Figures to emit. Defaults to all")

    command = _command("verify", _verify, "Run the fast property suite", run_config=False)
    command.add_argument("--trends", type=Path, help="Also check the acceptance trends of the experiments under this log root")

    command = _command("export-tokens", _export_tokens, "Write the training token stream for an external part-of-speech tagger")
    command.add_argument("--output", type=Path, required=True, help="Destination file, one token per line")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand.

    Args:
        argv (Sequence[str], optional): Command line arguments. Defaults to sys.argv.

    Returns:
        int: 0 on success, 1 when verification checks fail, otherwise the exit code of the aborting exception.
    """
    args = build_parser().parse_args(argv)
    training_log = Training_Log(log_to_console=not args.quiet)
    warning_log = Memorization_Warning_Log()
    error_log = Memorization_Error_Log()
    try:
        return int(args.handler(args, training_log, warning_log))
    except LM_Memorization_Exception as error:
        error_log.report_error(error, args.command)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
