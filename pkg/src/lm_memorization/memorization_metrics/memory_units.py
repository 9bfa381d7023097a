"""Memory unit lengths: maximal runs of consecutive exactly-memorized positions within a sequence."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from lm_memorization.memorization_metrics.Context_Set import Context_Set


@dataclass(frozen=True)
class Memory_Unit_Stats:
    """Run-length statistics of memorized positions at one epoch.

    Attributes:
        epoch (int): The epoch measured.
        mean_length (float): Mean run length L with each run weighted equally; 0 when there are no runs.
        token_weighted_length (float): Mean run length weighted by run length; 0 when there are no runs.
        run_count (int): Number of runs.
        histogram (dict[int, int]): Count of runs per run length.
    """

    epoch: int
    mean_length: float
    token_weighted_length: float
    run_count: int
    histogram: dict[int, int] = field(default_factory=dict)

    @property
    def memorized_positions(self) -> int:
        """
        Returns:
            int: Sum of length x count over the histogram, the number of memorized positions.
        """
        return sum(length * count for length, count in self.histogram.items())

    def to_dict(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "mean_L": self.mean_length,
            "mean_L_tokens": self.token_weighted_length,
            "run_count": self.run_count,
            "histogram": {str(length): count for length, count in sorted(self.histogram.items())},
        }


def run_lengths(bitmap: np.ndarray) -> np.ndarray:
    """
    Args:
        bitmap (np.ndarray): One sequence's memorized flags in position order.

    Returns:
        np.ndarray: Lengths of the maximal runs of True values, in order.
    """
    padded = np.concatenate([[0], np.asarray(bitmap, dtype=np.int8), [0]])
    edges = np.diff(padded)
    return np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)


def memory_unit_lengths(bitmaps: Iterable[np.ndarray], epoch: int = 0) -> Memory_Unit_Stats:
    """
    Args:
        bitmaps (Iterable[np.ndarray]): Per-sequence memorized flags of causal contexts in position order. Runs never cross sequences.
        epoch (int, optional): The epoch measured. Defaults to 0.

    Returns:
        Memory_Unit_Stats: The run statistics.
    """
    lengths = [run_lengths(bitmap) for bitmap in bitmaps]
    runs = np.concatenate(lengths) if lengths else np.zeros(0, dtype=np.int64)
    if runs.size == 0:
        return Memory_Unit_Stats(epoch, 0.0, 0.0, 0, {})
    histogram = Counter(int(length) for length in runs)
    total = int(runs.sum())
    return Memory_Unit_Stats(epoch, total / runs.size, int(np.sum(runs * runs)) / total, int(runs.size), dict(sorted(histogram.items())))


def correctness_bitmaps(contexts: Context_Set, correct: np.ndarray) -> list[np.ndarray]:
    """
    Args:
        contexts (Context_Set): Causal contexts.
        correct (np.ndarray): Memorized flag per context.

    Returns:
        list[np.ndarray]: One bitmap per sequence with the flags of its contexts in position order.
    """
    order = np.lexsort((contexts.position, contexts.sequence_index))
    sequences = contexts.sequence_index[order]
    flags = np.asarray(correct, dtype=bool)[order]
    boundaries = np.flatnonzero(np.diff(sequences)) + 1
    return list(np.split(flags, boundaries))
