"""Figure data: CSV tables assembled from completed experiment summaries and metric logs.

Every row carries the run id and the epoch, update or threshold it was read from, so each value traces back to one metric log record.
Rows are sorted on their key columns, so emitting twice from unchanged logs writes identical bytes.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from lm_memorization.experiment_harness.Experiment_Summary import Experiment_Summary, Run_Entry, load_experiments, missing_runs
from lm_memorization.experiment_harness.Forgetting_Curve import Forgetting_Curve, forgetting_curve
from lm_memorization.experiment_harness.metric_log import COMPLETE_KIND, INJECTION_KIND, METRICS_FILE, history_from_records, read_records
from lm_memorization.experiment_harness.Run_Config import Experiment_Kind
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Missing_Runs_Exception
from lm_memorization.memorization_metrics.Memorization_History import Crossing_Kind, Memorization_History
from lm_memorization.memorization_metrics.thresholds import DEFAULT_ROLLING_WINDOW, memorization_before_overfit, rolling_average, run_crossing

FIGURES_DIR = "figures"
FORGETTING_KINDS = (Experiment_Kind.forgetting, Experiment_Kind.repetition, Experiment_Kind.order_invariance)


class Run_Logs:
    """Read-once cache of the metric logs under a log root."""

    def __init__(self, log_root: str | Path) -> None:
        self.log_root: Path = Path(log_root)
        self._records: dict[str, list[dict[str, Any]]] = {}

    def records(self, run_id: str) -> list[dict[str, Any]]:
        if run_id not in self._records:
            self._records[run_id] = read_records(self.log_root / run_id / METRICS_FILE)
        return self._records[run_id]

    def history(self, run_id: str) -> Memorization_History:
        return history_from_records(self.records(run_id))

    def summary(self, run_id: str) -> dict[str, Any]:
        records = self.records(run_id)
        return dict(records[-1].get("summary", {})) if records and records[-1]["kind"] == COMPLETE_KIND else {}

    def curve(self, run_id: str) -> Forgetting_Curve:
        return forgetting_curve(self.records(run_id))


Figure_Builder = Callable[[Sequence[Experiment_Summary], Run_Logs], list[dict[str, Any]]]


def _entries(experiments: Sequence[Experiment_Summary], kinds: Iterable[Experiment_Kind] | None = None) -> list[tuple[Experiment_Summary, Run_Entry]]:
    kinds = None if kinds is None else tuple(kinds)
    return [(experiment, entry) for experiment in experiments if kinds is None or experiment.kind in kinds for entry in experiment.runs]


def _unique_entries(experiments: Sequence[Experiment_Summary]) -> list[Run_Entry]:
    unique: dict[str, Run_Entry] = {}
    for _, entry in _entries(experiments):
        unique.setdefault(entry.run_id, entry)
    return list(unique.values())


def _crossing_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs, kinds: Sequence[Experiment_Kind]) -> list[dict[str, Any]]:
    rows = []
    for experiment, entry in _entries(experiments, kinds):
        history = logs.history(entry.run_id)
        for tau in experiment.taus:
            crossing = run_crossing(history, tau, entry.crossing_kind)
            rows.append(
                {
                    "experiment_id": experiment.experiment_id,
                    "run_id": entry.run_id,
                    "preset": entry.preset,
                    "param_count": entry.param_count,
                    "seed": entry.seed,
                    "task": entry.task,
                    "learning_rate": entry.learning_rate,
                    "data_fraction": entry.data_fraction,
                    "tau": tau,
                    "axis": str(crossing.kind),
                    "T": crossing.index,
                    "reached": crossing.reached,
                    "budget": crossing.budget,
                    "status": crossing.describe(),
                    "diverged": "diverged" in logs.summary(entry.run_id),
                }
            )
    return rows


def t_vs_n_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    """T(N, tau) of every size-sweep and dataset-size-sweep run, one row per (run, tau)."""
    return _crossing_rows(experiments, logs, (Experiment_Kind.scale_sweep, Experiment_Kind.data_sweep))


def lr_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    """T(N, 0.9) against the learning rate, one row per learning-rate sweep run."""
    return _crossing_rows(experiments, logs, (Experiment_Kind.lr_sweep,))


def memorization_before_overfit_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    rows = []
    for experiment, entry in _entries(experiments, (Experiment_Kind.scale_sweep,)):
        history = logs.history(entry.run_id)
        if not history.epochs:
            continue
        point = memorization_before_overfit(history)
        rows.append(
            {
                "experiment_id": experiment.experiment_id,
                "run_id": entry.run_id,
                "preset": entry.preset,
                "param_count": entry.param_count,
                "seed": entry.seed,
                "task": entry.task,
                "epoch": point.epoch,
                "M": point.memorization,
                "overfit_detected": point.overfit_detected,
            }
        )
    return rows


def docid_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    rows = []
    for experiment, entry in _entries(experiments, (Experiment_Kind.docid,)):
        for record in logs.history(entry.run_id).epochs:
            rows.append(
                {
                    "experiment_id": experiment.experiment_id,
                    "run_id": entry.run_id,
                    "arm": entry.arm,
                    "param_count": entry.param_count,
                    "seed": entry.seed,
                    "epoch": record.epoch,
                    "M": record.memorization,
                }
            )
    return rows


def pos_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    """R(p) and R_mem(p) of every run that tracked parts of speech, one row per (run, epoch, tag)."""
    rows = []
    for entry in _unique_entries(experiments):
        for record in logs.history(entry.run_id).epochs:
            if record.pos_record is None:
                continue
            for tag, (ratio, memorized_ratio) in record.pos_record.ratios.items():
                rows.append(
                    {
                        "run_id": entry.run_id,
                        "param_count": entry.param_count,
                        "seed": entry.seed,
                        "epoch": record.epoch,
                        "M": record.memorization,
                        "tag": str(tag),
                        "R": ratio,
                        "R_mem": memorized_ratio,
                        "count": record.pos_record.counts.get(tag, 0),
                    }
                )
    return rows


def _curve_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs, kinds: Sequence[Experiment_Kind]) -> list[dict[str, Any]]:
    rows = []
    for experiment, entry in _entries(experiments, kinds):
        curve = logs.curve(entry.run_id)
        for epoch, memorization, perplexity in zip(curve.epochs, curve.memorization, curve.perplexity, strict=True):
            rows.append(
                {
                    "experiment_id": experiment.experiment_id,
                    "run_id": entry.run_id,
                    "arm": entry.arm,
                    "preset": entry.preset,
                    "param_count": entry.param_count,
                    "seed": entry.seed,
                    "inject_epoch": curve.injection_epochs[0],
                    "repetitions": entry.repetitions,
                    "spacing_period": entry.spacing_period,
                    "epoch": epoch,
                    "special_M": memorization,
                    "special_ppl": perplexity,
                    "baseline": curve.baseline,
                }
            )
    return rows


def forgetting_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    """Special-batch curves of the size study with the baseline of each curve."""
    return [{k: v for k, v in row.items() if k not in ("repetitions", "spacing_period", "special_ppl")} for row in _curve_rows(experiments, logs, (Experiment_Kind.forgetting,))]


def repetition_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    return [{k: v for k, v in row.items() if k not in ("preset", "special_ppl")} for row in _curve_rows(experiments, logs, (Experiment_Kind.repetition,))]


def special_batch_ppl_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    keep = ("experiment_id", "run_id", "arm", "param_count", "seed", "epoch", "special_M", "special_ppl")
    return [{k: row[k] for k in keep} for row in _curve_rows(experiments, logs, FORGETTING_KINDS)]


def diff_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    """diff(T) of every forgetting curve, one row per curve point after the first."""
    rows = []
    for experiment, entry in _entries(experiments, FORGETTING_KINDS):
        curve = logs.curve(entry.run_id)
        for epoch, diff in zip(curve.epochs[1:], curve.diff(), strict=True):
            rows.append(
                {
                    "experiment_id": experiment.experiment_id,
                    "run_id": entry.run_id,
                    "arm": entry.arm,
                    "param_count": entry.param_count,
                    "seed": entry.seed,
                    "epoch": epoch,
                    "diff": float(diff),
                }
            )
    return rows


def memory_unit_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    rows = []
    for entry in _unique_entries(experiments):
        packed = logs.summary(entry.run_id).get("mean_packed_length")
        for record in logs.history(entry.run_id).epochs:
            units = record.memory_units
            if units is None:
                continue
            rows.append(
                {
                    "run_id": entry.run_id,
                    "param_count": entry.param_count,
                    "seed": entry.seed,
                    "epoch": record.epoch,
                    "mean_L": units.mean_length,
                    "mean_L_tokens": units.token_weighted_length,
                    "run_count": units.run_count,
                    "mean_packed_length": packed,
                }
            )
    return rows


def rolling_update_memorization(history: Memorization_History, window: int = DEFAULT_ROLLING_WINDOW) -> dict[int, float]:
    """
    Args:
        history (Memorization_History): A run history.
        window (int, optional): Rolling window over updates. Defaults to 5.

    Returns:
        dict[int, float]: Rolling M_update at the last update of each epoch, keyed by epoch.
    """
    if not history.updates:
        return {}
    smoothed = rolling_average(history.memorization_series(Crossing_Kind.update), window)
    return {record.epoch: float(value) for record, value in zip(history.updates, smoothed, strict=True)}


def update_tracking_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    rows = []
    for entry in _unique_entries(experiments):
        history = logs.history(entry.run_id)
        rolling = rolling_update_memorization(history)
        for record in history.epochs:
            rows.append(
                {
                    "run_id": entry.run_id,
                    "param_count": entry.param_count,
                    "seed": entry.seed,
                    "epoch": record.epoch,
                    "M": record.memorization,
                    "M_update_rolling": rolling.get(record.epoch, np.nan),
                }
            )
    return rows


def order_invariance_rows(experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> list[dict[str, Any]]:
    rows = []
    for experiment in experiments:
        if experiment.kind is not Experiment_Kind.order_invariance:
            continue
        baselines = {entry.run_id: logs.curve(entry.run_id).baseline for entry in experiment.runs}
        spreads: dict[int, float] = {}
        for entry in experiment.runs:
            seed_baselines = [baselines[other.run_id] for other in experiment.runs if other.seed == entry.seed]
            spreads[entry.seed] = float(np.ptp(seed_baselines))
        for entry in experiment.runs:
            rows.append(
                {
                    "experiment_id": experiment.experiment_id,
                    "run_id": entry.run_id,
                    "arm": entry.arm,
                    "param_count": entry.param_count,
                    "seed": entry.seed,
                    "inject_epoch": entry.inject_epoch,
                    "baseline": baselines[entry.run_id],
                    "spread": spreads[entry.seed],
                }
            )
    return rows


FIGURES: dict[str, tuple[str, Figure_Builder, tuple[str, ...], tuple[Experiment_Kind, ...] | None]] = {
    "fig1": ("fig1_t_vs_n.csv", t_vs_n_rows, ("experiment_id", "param_count", "data_fraction", "seed", "tau"), (Experiment_Kind.scale_sweep, Experiment_Kind.data_sweep)),
    "fig4": ("fig4_mem_before_overfit.csv", memorization_before_overfit_rows, ("experiment_id", "param_count", "seed"), (Experiment_Kind.scale_sweep,)),
    "fig7": ("fig7_lr.csv", lr_rows, ("experiment_id", "param_count", "seed", "learning_rate", "tau"), (Experiment_Kind.lr_sweep,)),
    "fig8": ("fig8_docid.csv", docid_rows, ("experiment_id", "seed", "arm", "epoch"), (Experiment_Kind.docid,)),
    "fig9": ("fig9_pos.csv", pos_rows, ("run_id", "epoch", "tag"), None),
    "fig10": ("fig10_forgetting.csv", forgetting_rows, ("experiment_id", "param_count", "seed", "epoch"), (Experiment_Kind.forgetting,)),
    "fig12": ("fig12_repetition.csv", repetition_rows, ("experiment_id", "seed", "arm", "epoch"), (Experiment_Kind.repetition,)),
    "fig16": ("fig16_diff.csv", diff_rows, ("experiment_id", "param_count", "seed", "arm", "epoch"), FORGETTING_KINDS),
    "fig17": ("fig17_mul.csv", memory_unit_rows, ("param_count", "seed", "run_id", "epoch"), None),
    "update_tracking": ("update_tracking.csv", update_tracking_rows, ("param_count", "seed", "run_id", "epoch"), None),
    "special_batch_ppl": ("special_batch_ppl.csv", special_batch_ppl_rows, ("experiment_id", "param_count", "seed", "arm", "epoch"), FORGETTING_KINDS),
    "order_invariance": ("order_invariance.csv", order_invariance_rows, ("experiment_id", "seed", "inject_epoch", "run_id"), (Experiment_Kind.order_invariance,)),
}


def figure_table(figure: str, experiments: Sequence[Experiment_Summary], logs: Run_Logs) -> pd.DataFrame:
    """
    Args:
        figure (str): A figure id, a key of FIGURES.
        experiments (Sequence[Experiment_Summary]): The experiments to draw runs from.
        logs (Run_Logs): The metric logs.

    Returns:
        pd.DataFrame: The figure table sorted on its key columns.
    """
    _, builder, keys, _ = FIGURES[figure]
    frame = pd.DataFrame(builder(experiments, logs))
    if frame.empty:
        return frame
    for column in ("T", "spacing_period", "inject_epoch"):
        if column in frame:
            frame[column] = frame[column].astype("Int64")
    return frame.sort_values(list(keys), kind="mergesort").reset_index(drop=True)


def _required_runs(figures: Sequence[str], experiments: Sequence[Experiment_Summary]) -> list[str]:
    run_ids: dict[str, None] = {}
    for figure in figures:
        kinds = FIGURES[figure][3]
        for _, entry in _entries(experiments, kinds):
            run_ids.setdefault(entry.run_id)
    return list(run_ids)


def figure_tables(log_root: str | Path, figures: Sequence[str] | None = None) -> dict[str, pd.DataFrame]:
    """
    Args:
        log_root (str | Path): The log root holding run directories and experiment summaries.
        figures (Sequence[str], optional): Figure ids to build. Defaults to every figure.

    Returns:
        dict[str, pd.DataFrame]: The table of each figure, keyed by figure id.

    Raises:
        Config_Exception: If a figure id is unknown.
        Missing_Runs_Exception: If a run the figures draw on has no complete metric log.
    """
    figures = list(FIGURES) if figures is None else list(figures)
    unknown = [figure for figure in figures if figure not in FIGURES]
    if unknown:
        raise Config_Exception(f"Unknown figures {unknown}; expected some of {list(FIGURES)}")
    experiments = load_experiments(log_root)
    missing = missing_runs(log_root, _required_runs(figures, experiments))
    if missing:
        raise Missing_Runs_Exception(missing)
    logs = Run_Logs(log_root)
    return {figure: figure_table(figure, experiments, logs) for figure in figures}


def write_table(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def emit_figure_data(log_root: str | Path, output_dir: str | Path | None = None, figures: Sequence[str] | None = None) -> dict[str, Path]:
    """Write the CSV file of every requested figure.

    Args:
        log_root (str | Path): The log root holding run directories and experiment summaries.
        output_dir (str | Path, optional): Where to write the files. Defaults to the figures directory of the log root.
        figures (Sequence[str], optional): Figure ids to write. Defaults to every figure.

    Returns:
        dict[str, Path]: The written file of each figure, keyed by figure id.
    """
    output = Path(log_root) / FIGURES_DIR if output_dir is None else Path(output_dir)
    return {figure: write_table(frame, output / FIGURES[figure][0]) for figure, frame in figure_tables(log_root, figures).items()}


def write_run_figures(run_dir: str | Path) -> list[Path]:
    """Write the per-run tables of one run into its figures directory.

    memorization.csv holds one row per epoch record, update_tracking.csv one row per update and, for forgetting runs, forgetting.csv one row per curve point.

    Args:
        run_dir (str | Path): The run directory.

    Returns:
        list[Path]: The written files.
    """
    run_dir = Path(run_dir)
    records = read_records(run_dir / METRICS_FILE)
    history = history_from_records(records)
    written = []
    epochs = pd.DataFrame(
        [
            {
                "run_id": history.run_id,
                "epoch": record.epoch,
                "M": record.memorization,
                "ppl_val": record.validation_perplexity,
                "tokens_processed": record.tokens_processed,
                "mean_L": None if record.memory_units is None else record.memory_units.mean_length,
            }
            for record in history.epochs
        ],
        columns=["run_id", "epoch", "M", "ppl_val", "tokens_processed", "mean_L"],
    )
    written.append(write_table(epochs, run_dir / FIGURES_DIR / "memorization.csv"))
    smoothed = rolling_average(history.memorization_series(Crossing_Kind.update)) if history.updates else np.zeros(0)
    updates = pd.DataFrame(
        [
            {"run_id": history.run_id, "update": record.update, "epoch": record.epoch, "batch": record.batch_id, "M_update": record.memorization, "M_update_rolling": float(value)}
            for record, value in zip(history.updates, smoothed, strict=True)
        ],
        columns=["run_id", "update", "epoch", "batch", "M_update", "M_update_rolling"],
    )
    written.append(write_table(updates, run_dir / FIGURES_DIR / "update_tracking.csv"))
    if any(record["kind"] == INJECTION_KIND for record in records):
        curve = forgetting_curve(records)
        frame = pd.DataFrame({"run_id": curve.run_id, "epoch": curve.epochs, "special_M": curve.memorization, "special_ppl": curve.perplexity, "baseline": curve.baseline})
        written.append(write_table(frame, run_dir / FIGURES_DIR / "forgetting.csv"))
    return written

