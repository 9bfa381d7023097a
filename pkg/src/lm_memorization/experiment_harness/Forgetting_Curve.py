"""Module containing the Forgetting_Curve class: special-batch memorization after injection."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

import numpy as np

from lm_memorization.experiment_harness.metric_log import EPOCH_KIND, INJECTION_KIND
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Setup_Exception


@dataclass(frozen=True)
class Forgetting_Curve:
    """The special-batch M(f) of a run from the first injection on.

    The first point is the reading taken right after the first injection; every later point is the reading at the end of a later epoch.

    Attributes:
        run_id (str): The run.
        injection_epochs (tuple[int, ...]): Epochs after which the special batch was injected.
        epochs (tuple[int, ...]): Epoch of every point.
        memorization (tuple[float, ...]): Special-batch M(f) of every point.
        perplexity (tuple[float, ...]): Special-batch perplexity of every point.
    """

    run_id: str
    injection_epochs: tuple[int, ...]
    epochs: tuple[int, ...]
    memorization: tuple[float, ...]
    perplexity: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.memorization)

    @property
    def baseline(self) -> float:
        """
        Returns:
            float: The forgetting baseline, the lowest memorization on the curve.
        """
        return float(min(self.memorization))

    @property
    def baseline_epoch(self) -> int:
        return self.epochs[int(np.argmin(self.memorization))]

    def diff(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: diff(T) = M_T - M_(T-1) for every point after the first.
        """
        return np.diff(np.asarray(self.memorization, dtype=np.float64))

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "injection_epochs": list(self.injection_epochs),
            "epochs": list(self.epochs),
            "memorization": list(self.memorization),
            "perplexity": list(self.perplexity),
            "baseline": self.baseline,
        }


def forgetting_curve(records: Iterable[dict[str, Any]]) -> Forgetting_Curve:
    """
    Args:
        records (Iterable[dict[str, Any]]): Metric log records of a forgetting run.

    Returns:
        Forgetting_Curve: The curve from the first injection reading through the last epoch.

    Raises:
        Setup_Exception: If the log holds no injection record.
    """
    records = list(records)
    injections = [record for record in records if record["kind"] == INJECTION_KIND]
    if not injections:
        raise Setup_Exception("The metric log holds no injection of the special batch")
    first = injections[0]
    points = [(int(first["index"]), float(first["special_M"]), float(first["special_ppl"]))]
    for record in records:
        if record["kind"] == EPOCH_KIND and record["index"] > first["index"] and record.get("special_M") is not None:
            points.append((int(record["index"]), float(record["special_M"]), float(record["special_ppl"])))
    epochs, memorization, perplexity = zip(*points, strict=True)
    return Forgetting_Curve(str(first["run_id"]), tuple(int(record["index"]) for record in injections), epochs, memorization, perplexity)
