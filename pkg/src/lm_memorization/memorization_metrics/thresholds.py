"""Threshold crossings T(N, tau) and T_update(N, tau), rolling averages and overfit detection."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.memorization_metrics.Memorization_History import Crossing_Kind, Memorization_History

DEFAULT_ROLLING_WINDOW = 5


@dataclass(frozen=True)
class Threshold_Crossing:
    """The first time a memorization series reaches a threshold.

    Attributes:
        tau (float): The threshold in (0, 1).
        kind (Crossing_Kind): Whether index counts epochs or updates.
        index (int | None): The first 1-based index with M >= tau, None if never reached.
        param_count (int): The model size N.
        budget (int): Epochs or updates available to the run.
    """

    tau: float
    kind: Crossing_Kind
    index: int | None
    param_count: int
    budget: int

    @property
    def reached(self) -> bool:
        return self.index is not None

    def describe(self) -> str:
        """
        Returns:
            str: The crossing index, or "unreached at budget B".
        """
        return str(self.index) if self.index is not None else f"unreached at budget {self.budget}"

    def to_dict(self) -> dict[str, Any]:
        return {"tau": self.tau, "kind": str(self.kind), "index": self.index, "reached": self.reached, "param_count": self.param_count, "budget": self.budget}

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> Threshold_Crossing:
        return cls(float(values["tau"]), Crossing_Kind(values["kind"]), values["index"], int(values["param_count"]), int(values["budget"]))


def rolling_average(series: npt.ArrayLike, window: int = DEFAULT_ROLLING_WINDOW) -> np.ndarray:
    """
    Args:
        series (npt.ArrayLike): The values.
        window (int, optional): Window size. Defaults to 5.

    Returns:
        np.ndarray: Trailing mean over min(window, i + 1) points at each index i.

    Raises:
        Config_Exception: If window is smaller than 1.
    """
    if window < 1:
        raise Config_Exception(f"Rolling window must be at least 1 but got {window}")
    values = np.asarray(series, dtype=np.float64)
    return np.array([values[max(0, i - window + 1) : i + 1].mean() for i in range(values.size)], dtype=np.float64)


def first_crossing(series: npt.ArrayLike, tau: float) -> int | None:
    """
    Args:
        series (npt.ArrayLike): Memorization values in time order.
        tau (float): The threshold.

    Returns:
        int | None: The 0-based position of the first value >= tau, None if there is none.
    """
    hits = np.flatnonzero(np.asarray(series, dtype=np.float64) >= tau)
    return int(hits[0]) if hits.size else None


def threshold_crossing(history: Memorization_History, tau: float, kind: Crossing_Kind = Crossing_Kind.epoch, smooth_window: int | None = None) -> Threshold_Crossing:
    """
    Args:
        history (Memorization_History): The run history.
        tau (float): The threshold in (0, 1).
        kind (Crossing_Kind, optional): Cross on epoch M(f) for T or on per-update M_update for T_update. Defaults to epochs.
        smooth_window (int, optional): If given, cross on the rolling average of the series with this window. Defaults to the raw series.

    Returns:
        Threshold_Crossing: The first index with M >= tau, or an unreached crossing.

    Raises:
        Config_Exception: If tau is outside (0, 1) or the history has no records along the axis.
    """
    if not 0.0 < tau < 1.0:
        raise Config_Exception(f"Threshold must lie in (0, 1) but got {tau}")
    series = history.memorization_series(kind)
    if series.size == 0:
        raise Config_Exception(f"History of run {history.run_id} has no {kind} records")
    if smooth_window is not None:
        series = rolling_average(series, smooth_window)
    position = first_crossing(series, tau)
    index = None if position is None else int(history.indices(kind)[position])
    return Threshold_Crossing(tau, kind, index, history.param_count, history.budget(kind))


def run_crossing(history: Memorization_History, tau: float, kind: Crossing_Kind = Crossing_Kind.epoch, smooth_window: int | None = None) -> Threshold_Crossing:
    """
    Args:
        history (Memorization_History): The run history, possibly of a run that diverged before its first record.
        tau (float): The threshold in (0, 1).
        kind (Crossing_Kind, optional): The time axis. Defaults to epochs.
        smooth_window (int, optional): Rolling-average window. Defaults to the raw series.

    Returns:
        Threshold_Crossing: The crossing of the history, or an unreached crossing at the run budget when the history is empty along the axis.
    """
    if history.memorization_series(kind).size == 0:
        return Threshold_Crossing(tau, kind, None, history.param_count, history.budget(kind))
    return threshold_crossing(history, tau, kind, smooth_window)


def detect_overfit_epoch(perplexities: Memorization_History | Sequence[float | None]) -> int | None:
    """
    Args:
        perplexities (Memorization_History | Sequence[float | None]): A history, or validation perplexity per epoch starting at epoch 1.

    Returns:
        int | None: The smallest 1-based epoch e >= 2 with ppl(e) > ppl(e - 1), None if perplexity never increases.
    """
    if isinstance(perplexities, Memorization_History):
        epochs = [int(index) for index in perplexities.indices(Crossing_Kind.epoch)]
        values = perplexities.perplexity_series()
    else:
        values = list(perplexities)
        epochs = list(range(1, len(values) + 1))
    for position in range(1, len(values)):
        previous, current = values[position - 1], values[position]
        if previous is not None and current is not None and current > previous:
            return epochs[position]
    return None


@dataclass(frozen=True)
class Overfit_Point:
    """Memorization reached before the model starts to overfit.

    Attributes:
        epoch (int): The last epoch before the overfit epoch, or the final epoch if no overfitting was detected.
        memorization (float): M(f) at that epoch.
        overfit_detected (bool): True if validation perplexity increased during the run.
    """

    epoch: int
    memorization: float
    overfit_detected: bool


def memorization_before_overfit(history: Memorization_History) -> Overfit_Point:
    """
    Args:
        history (Memorization_History): A history with validation perplexity per epoch.

    Returns:
        Overfit_Point: M(f) at the epoch preceding the overfit epoch.
    """
    if not history.epochs:
        raise Config_Exception(f"History of run {history.run_id} has no epoch records")
    overfit = detect_overfit_epoch(history)
    if overfit is None:
        last = history.epochs[-1]
        return Overfit_Point(last.epoch, last.memorization, False)
    position = [record.epoch for record in history.epochs].index(overfit) - 1
    record = history.epochs[position]
    return Overfit_Point(record.epoch, record.memorization, True)
