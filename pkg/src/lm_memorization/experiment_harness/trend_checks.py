"""Qualitative trend checks over figure tables of completed experiments.

Each check is evaluated per seed and passes when a majority of seeds pass; the checks that hold exactly by construction must hold for every run.
A check whose table is empty is skipped rather than failed.
"""

from __future__ import annotations

import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from lm_memorization.corpus_pipeline.Pos_Tag import Pos_Tag
from lm_memorization.experiment_harness.figure_data import figure_tables
from lm_memorization.lm_memorization_warnings.LM_Memorization_Warning import Spearman_Undefined_Warning
from lm_memorization.memorization_metrics.thresholds import first_crossing, rolling_average

RANK_CORRELATION_BOUND = 0.8
FAST_TAU = 0.9
DOCID_TAU = 0.8
POS_WINDOW = (0.3, 0.6)
MEMORIZED_FASTER_TAGS = (Pos_Tag.NOUN, Pos_Tag.PROPN, Pos_Tag.NUM)
MEMORIZED_SLOWER_TAGS = (Pos_Tag.VERB, Pos_Tag.ADJ)
REPETITION_GAP = 0.02
SPACING_TOLERANCE = 0.02
ORDER_TOLERANCE = 0.05
TRACKING_TOLERANCE = 0.05
TRACKING_WARMUP_FRACTION = 0.1
MEMORY_UNIT_SHARE = 0.5


class Trend_Status(Enum):
    """Outcome of a trend check."""

    passed = "passed"
    failed = "failed"
    skipped = "skipped"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Trend_Result:
    """
    Attributes:
        criterion (int): Number of the acceptance criterion checked.
        name (str): Short name of the trend.
        status (Trend_Status): The outcome.
        detail (str): What was measured.
        seeds (dict[int, bool]): Outcome per seed, for checks decided by majority.
    """

    criterion: int
    name: str
    status: Trend_Status
    detail: str = ""
    seeds: dict[int, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status is not Trend_Status.failed


def spearman(x: Sequence[float], y: Sequence[float], label: str) -> float | None:
    """
    Args:
        x (Sequence[float]): First series.
        y (Sequence[float]): Second series.
        label (str): Name of the comparison, used in the warning.

    Returns:
        float | None: Spearman's rank correlation, or None when either series is constant or shorter than two.
    """
    if len(x) < 2 or len(set(x)) < 2 or len(set(y)) < 2:
        warnings.warn(Spearman_Undefined_Warning(label), stacklevel=2)
        return None
    rho, _ = spearmanr(x, y)
    return float(rho)


def _majority(criterion: int, name: str, seeds: dict[int, bool], detail: str) -> Trend_Result:
    if not seeds:
        return Trend_Result(criterion, name, Trend_Status.skipped, "no data")
    status = Trend_Status.passed if sum(seeds.values()) * 2 > len(seeds) else Trend_Status.failed
    return Trend_Result(criterion, name, status, detail, dict(seeds))


def _exact(criterion: int, name: str, violations: list[str], checked: int) -> Trend_Result:
    if checked == 0:
        return Trend_Result(criterion, name, Trend_Status.skipped, "no data")
    if violations:
        return Trend_Result(criterion, name, Trend_Status.failed, "; ".join(violations[:5]))
    return Trend_Result(criterion, name, Trend_Status.passed, f"{checked} series checked")


def _crossing_values(rows: pd.DataFrame) -> np.ndarray:
    """Crossing indices with unreached thresholds placed one past the budget."""
    return np.where(rows["reached"].to_numpy(dtype=bool), rows["T"].fillna(0).to_numpy(dtype=np.float64), rows["budget"].to_numpy(dtype=np.float64) + 1)


def larger_memorize_faster(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("fig1", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        rows = table[(table["task"] == "causal") & (table["tau"] == FAST_TAU) & (table["data_fraction"] == 1.0) & table["experiment_id"].str.startswith("scale-sweep")]
        for seed, group in rows.groupby("seed"):
            group = group.sort_values("param_count")
            if group["param_count"].nunique() < 2:
                continue
            values = _crossing_values(group)
            rho = spearman(list(group["param_count"]), list(values), f"T(N, {FAST_TAU}) seed {seed}")
            seeds[int(seed)] = bool(np.all(np.diff(values) < 0) and rho is not None and rho <= -RANK_CORRELATION_BOUND)
    return _majority(6, "larger models memorize faster", seeds, f"T(N, {FAST_TAU}) strictly decreasing with rho <= -{RANK_CORRELATION_BOUND}")


def tau_monotone(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("fig1", pd.DataFrame())
    violations: list[str] = []
    checked = 0
    if not table.empty:
        for run_id, group in table.groupby("run_id"):
            checked += 1
            if np.any(np.diff(_crossing_values(group.sort_values("tau"))) < 0):
                violations.append(f"{run_id} decreases in tau")
    return _exact(7, "T increasing in tau", violations, checked)


def memorize_before_overfit(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("fig4", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for seed, group in table[table["task"] == "causal"].groupby("seed"):
            if group["param_count"].nunique() < 2:
                continue
            rho = spearman(list(group["param_count"]), list(group["M"]), f"M before overfit seed {seed}")
            seeds[int(seed)] = rho is not None and rho >= RANK_CORRELATION_BOUND
    return _majority(8, "more memorization before overfitting at scale", seeds, f"rho(N, M) >= {RANK_CORRELATION_BOUND}")


def lr_sweep_shape(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("fig7", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for seed, group in table.groupby("seed"):
            grid = sorted(group["learning_rate"].unique())
            sizes = sorted(group["param_count"].unique())
            if len(grid) < 3 or len(sizes) < 2:
                continue
            interior = grid[1:-1]
            values = {(size, rate): float(_crossing_values(rows)[0]) for (size, rate), rows in group.groupby(["param_count", "learning_rate"])}
            interior_minimum = all(grid[int(np.argmin([values[(size, rate)] for rate in grid]))] in interior for size in sizes)
            shared = min(interior, key=lambda rate: sum(values[(size, rate)] for size in sizes))
            faster_at_scale = bool(np.all(np.diff([values[(size, shared)] for size in sizes]) < 0))
            seeds[int(seed)] = interior_minimum and faster_at_scale
    return _majority(9, "learning-rate sweep shape", seeds, "minimum at an interior rate; larger size faster at the shared interior rate")


def docid_ordering(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("fig8", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for seed, group in table.groupby("seed"):
            epochs: dict[str, float] = {}
            for arm, rows in group.groupby("arm"):
                rows = rows.sort_values("epoch")
                position = first_crossing(rows["M"].to_numpy(), DOCID_TAU)
                epochs[str(arm)] = float(rows["epoch"].iloc[position]) if position is not None else float("inf")
            if {"control", "vocab-only", "prepend"} <= set(epochs):
                seeds[int(seed)] = epochs["prepend"] <= epochs["vocab-only"] <= epochs["control"] and epochs["prepend"] < epochs["control"]
    return _majority(10, "unique identifiers speed memorization", seeds, f"epochs to M = {DOCID_TAU}: prepend <= vocab-only <= control, prepend < control")


def pos_ordering(tables: dict[str, pd.DataFrame]) -> list[Trend_Result]:
    table = tables.get("fig9", pd.DataFrame())
    if table.empty:
        return [Trend_Result(11, "nouns and numerals memorized faster", Trend_Status.skipped, "no data"), Trend_Result(11, "R_mem <= R", Trend_Status.skipped, "no data")]
    bound = table[table["R_mem"] > table["R"] + 1e-12]
    violations = [f"{row.run_id} epoch {row.epoch} {row.tag}" for row in bound.itertuples()]
    seeds: dict[int, bool] = {}
    for (seed, _run_id), group in table.groupby(["seed", "run_id"]):
        window = group[(group["M"] >= POS_WINDOW[0]) & (group["M"] <= POS_WINDOW[1])]
        if window.empty:
            continue
        epoch_rows = window[window["epoch"] == window["epoch"].min()]
        faster = epoch_rows[epoch_rows["tag"].isin([str(tag) for tag in MEMORIZED_FASTER_TAGS])]["R_mem"]
        slower = epoch_rows[epoch_rows["tag"].isin([str(tag) for tag in MEMORIZED_SLOWER_TAGS])]["R_mem"]
        if faster.empty or slower.empty:
            continue
        seeds[int(seed)] = seeds.get(int(seed), True) and bool(faster.mean() > slower.mean())
    ordering = _majority(11, "nouns and numerals memorized faster", seeds, f"mean R_mem of noun-like tags above verb-like tags at the first epoch with M in {POS_WINDOW}")
    return [ordering, _exact(11, "R_mem <= R", violations, int(table["run_id"].nunique()))]


def _head_tail_decay(diffs: np.ndarray) -> bool:
    count = min(3, diffs.size // 2)
    if count == 0:
        return False
    magnitudes = np.abs(diffs)
    return bool(magnitudes[-count:].mean() < magnitudes[:count].mean())


def forgetting_baseline_scale(tables: dict[str, pd.DataFrame]) -> list[Trend_Result]:
    table = tables.get("fig10", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for seed, group in table.groupby("seed"):
            baselines = group.groupby("param_count")["baseline"].first().sort_index()
            if baselines.size < 2:
                continue
            rho = spearman(list(baselines.index), list(baselines.values), f"forgetting baseline seed {seed}")
            seeds[int(seed)] = rho is not None and rho >= RANK_CORRELATION_BOUND
    baseline = _majority(12, "forgetting baseline grows with scale", seeds, f"rho(N, baseline) >= {RANK_CORRELATION_BOUND}")
    diffs = tables.get("fig16", pd.DataFrame())
    decay: dict[int, bool] = {}
    if not diffs.empty:
        for (seed, _run_id), group in diffs[diffs["experiment_id"].str.startswith("forgetting")].groupby(["seed", "run_id"]):
            decay[int(seed)] = decay.get(int(seed), True) and _head_tail_decay(group.sort_values("epoch")["diff"].to_numpy())
    return [baseline, _majority(12, "diff(T) decays", decay, "mean |diff| over the last 3 points below the first 3")]


def repetition_vs_spacing(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("fig12", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for seed, group in table.groupby("seed"):
            baselines = group.groupby("arm")["baseline"].first()
            if "k=1" not in baselines or "k=4" not in baselines:
                continue
            spaced = baselines[[arm for arm in baselines.index if str(arm).startswith("period=")]]
            repeated = baselines["k=4"] - baselines["k=1"] > REPETITION_GAP
            seeds[int(seed)] = bool(repeated and (spaced.size < 2 or np.ptp(spaced.to_numpy()) < SPACING_TOLERANCE))
    return _majority(13, "repetition raises the baseline, spacing does not", seeds, f"baseline(k=4) - baseline(k=1) > {REPETITION_GAP}; spaced arms within {SPACING_TOLERANCE}")


def order_invariance(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("order_invariance", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for seed, group in table.groupby("seed"):
            seeds[int(seed)] = bool(group["spread"].max() < ORDER_TOLERANCE)
    return _majority(14, "baseline independent of injection point", seeds, f"baseline spread < {ORDER_TOLERANCE}")


def update_tracking(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("update_tracking", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for (seed, _run_id), group in table.groupby(["seed", "run_id"]):
            late = group[group["epoch"] > TRACKING_WARMUP_FRACTION * group["epoch"].max()].dropna(subset=["M_update_rolling"])
            if late.empty:
                continue
            close = bool((late["M_update_rolling"] - late["M"]).abs().max() <= TRACKING_TOLERANCE)
            seeds[int(seed)] = seeds.get(int(seed), True) and close
    return _majority(15, "M_update tracks M(f)", seeds, f"rolling M_update within {TRACKING_TOLERANCE} of M(f) after the first {TRACKING_WARMUP_FRACTION:.0%} of training")


def memory_unit_growth(tables: dict[str, pd.DataFrame]) -> Trend_Result:
    table = tables.get("fig17", pd.DataFrame())
    seeds: dict[int, bool] = {}
    if not table.empty:
        for seed, group in table.groupby("seed"):
            largest = group[group["param_count"] == group["param_count"].max()]
            for _run_id, rows in largest.groupby("run_id"):
                rows = rows.sort_values("epoch")
                smoothed = rolling_average(rows["mean_L"].to_numpy())
                packed = rows["mean_packed_length"].iloc[-1]
                short = packed is not None and not pd.isna(packed) and rows["mean_L"].iloc[-1] < MEMORY_UNIT_SHARE * float(packed)
                seeds[int(seed)] = seeds.get(int(seed), True) and bool(np.all(np.diff(smoothed) >= -1e-12) and short)
    return _majority(16, "memory units grow but stay short", seeds, f"smoothed mean L non-decreasing; final mean L < {MEMORY_UNIT_SHARE:.0%} of mean packed length")


TREND_CHECKS: tuple[Callable[[dict[str, pd.DataFrame]], Trend_Result | list[Trend_Result]], ...] = (
    larger_memorize_faster,
    tau_monotone,
    memorize_before_overfit,
    lr_sweep_shape,
    docid_ordering,
    pos_ordering,
    forgetting_baseline_scale,
    repetition_vs_spacing,
    order_invariance,
    update_tracking,
    memory_unit_growth,
)


def evaluate_trends(tables: dict[str, pd.DataFrame]) -> list[Trend_Result]:
    """
    Args:
        tables (dict[str, pd.DataFrame]): Figure tables keyed by figure id.

    Returns:
        list[Trend_Result]: The outcome of every trend check, ordered by criterion.
    """
    results: list[Trend_Result] = []
    for check in TREND_CHECKS:
        outcome = check(tables)
        results.extend(outcome if isinstance(outcome, list) else [outcome])
    return results


def check_trends(log_root: str | Path) -> list[Trend_Result]:
    """
    Args:
        log_root (str | Path): A log root with completed experiments.

    Returns:
        list[Trend_Result]: The outcome of every trend check on the experiments under the log root.
    """
    return evaluate_trends(figure_tables(log_root))
