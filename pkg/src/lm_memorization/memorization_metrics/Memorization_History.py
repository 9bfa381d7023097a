"""Module containing the Memorization_History class: the per-epoch and per-update time series of a training run."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.memorization_metrics.memory_units import Memory_Unit_Stats
from lm_memorization.memorization_metrics.pos_metrics import Pos_Memorization_Record


class Crossing_Kind(Enum):
    """The time axis of a memorization series."""

    epoch = "epoch"
    update = "update"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Epoch_Record:
    """Measurements taken at the end of an epoch.

    Attributes:
        epoch (int): The 1-based epoch index.
        memorization (float): M(f) over the training context set.
        validation_perplexity (float | None): Validation perplexity, if a validation set was given.
        tokens_processed (int): Tokens trained on by the end of the epoch.
        pos_record (Pos_Memorization_Record | None): Part-of-speech ratios, if tracked.
        memory_units (Memory_Unit_Stats | None): Memory unit lengths, if tracked.
        special_memorization (float | None): M(f) on the special batch, for forgetting runs after injection.
        special_perplexity (float | None): Perplexity on the special batch, for forgetting runs after injection.
    """

    epoch: int
    memorization: float
    validation_perplexity: float | None = None
    tokens_processed: int = 0
    pos_record: Pos_Memorization_Record | None = None
    memory_units: Memory_Unit_Stats | None = None
    special_memorization: float | None = None
    special_perplexity: float | None = None


@dataclass(frozen=True)
class Update_Record:
    """M_update of one optimizer update.

    Attributes:
        update (int): The 1-based update index U.
        memorization (float): M_update over the update's batch.
        batch_id (int): Index of the batch within its epoch.
        epoch (int): The epoch the update belongs to.
        tokens_processed (int): Tokens trained on after the update.
    """

    update: int
    memorization: float
    batch_id: int
    epoch: int
    tokens_processed: int = 0


@dataclass
class Memorization_History:
    """Time series of M(f) per epoch and M_update per update for one run.

    Attributes:
        run_id (str): The run the history belongs to.
        param_count (int): The model size N.
        config_hash (str): Hash of the run configuration.
        epochs (list[Epoch_Record]): Epoch records with strictly increasing indices.
        updates (list[Update_Record]): Update records with strictly increasing indices.
        epoch_budget (int | None): Epochs available to the run, used to describe unreached thresholds.
        update_budget (int | None): Updates available to the run.
    """

    run_id: str
    param_count: int
    config_hash: str = ""
    epochs: list[Epoch_Record] = field(default_factory=list)
    updates: list[Update_Record] = field(default_factory=list)
    epoch_budget: int | None = None
    update_budget: int | None = None

    def add_epoch(self, record: Epoch_Record) -> None:
        """
        Args:
            record (Epoch_Record): The next epoch record.

        Raises:
            Config_Exception: If the epoch index does not increase or M lies outside [0, 1].
        """
        if self.epochs and record.epoch <= self.epochs[-1].epoch:
            raise Config_Exception(f"Epoch {record.epoch} does not follow epoch {self.epochs[-1].epoch}")
        _check_fraction(record.memorization)
        self.epochs.append(record)

    def add_update(self, record: Update_Record) -> None:
        """
        Args:
            record (Update_Record): The next update record.

        Raises:
            Config_Exception: If the update index does not increase or M_update lies outside [0, 1].
        """
        if self.updates and record.update <= self.updates[-1].update:
            raise Config_Exception(f"Update {record.update} does not follow update {self.updates[-1].update}")
        _check_fraction(record.memorization)
        self.updates.append(record)

    def indices(self, kind: Crossing_Kind = Crossing_Kind.epoch) -> np.ndarray:
        """
        Args:
            kind (Crossing_Kind, optional): The time axis. Defaults to epochs.

        Returns:
            np.ndarray: The recorded indices in order.
        """
        if kind is Crossing_Kind.epoch:
            return np.array([record.epoch for record in self.epochs], dtype=np.int64)
        return np.array([record.update for record in self.updates], dtype=np.int64)

    def memorization_series(self, kind: Crossing_Kind = Crossing_Kind.epoch) -> np.ndarray:
        """
        Args:
            kind (Crossing_Kind, optional): The time axis. Defaults to epochs.

        Returns:
            np.ndarray: M(f) per epoch or M_update per update.
        """
        records = self.epochs if kind is Crossing_Kind.epoch else self.updates
        return np.array([record.memorization for record in records], dtype=np.float64)

    def perplexity_series(self) -> list[float | None]:
        return [record.validation_perplexity for record in self.epochs]

    def budget(self, kind: Crossing_Kind = Crossing_Kind.epoch) -> int:
        """
        Args:
            kind (Crossing_Kind, optional): The time axis. Defaults to epochs.

        Returns:
            int: The run budget along the axis, or the last recorded index if no budget was set.
        """
        budget = self.epoch_budget if kind is Crossing_Kind.epoch else self.update_budget
        if budget is not None:
            return budget
        indices = self.indices(kind)
        return int(indices[-1]) if indices.size else 0

    def epoch_record(self, epoch: int) -> Epoch_Record:
        for record in self.epochs:
            if record.epoch == epoch:
                return record
        raise KeyError(epoch)

    def summary(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "param_count": self.param_count,
            "config_hash": self.config_hash,
            "epochs": len(self.epochs),
            "updates": len(self.updates),
            "final_M": self.epochs[-1].memorization if self.epochs else None,
        }


def _check_fraction(value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise Config_Exception(f"Memorization {value} lies outside [0, 1]")
