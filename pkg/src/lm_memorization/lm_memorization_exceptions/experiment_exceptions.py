"""This module contains exceptions raised by the experiment harness while setting up, running and aggregating experiments."""

from __future__ import annotations

from collections.abc import Iterable

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import LM_Memorization_Exception


class Setup_Exception(LM_Memorization_Exception):
    """Exception raised when an experiment cannot start, e.g. a special batch overlaps training data or a required checkpoint is missing."""

    exit_code = 2


class Unreached_Threshold_Exception(LM_Memorization_Exception):
    """Exception raised in strict mode when a memorization threshold is never crossed within the run budget.

    Attributes:
        run_id (str): The run that did not reach the threshold.
        tau (float): The threshold.
        budget (int): The number of epochs or updates available to the run.
    """

    exit_code = 4

    def __init__(self, run_id: str, tau: float, budget: int) -> None:
        """Initialize the Unreached_Threshold_Exception.

        Args:
            run_id (str): The run that did not reach the threshold.
            tau (float): The threshold.
            budget (int): The number of epochs or updates available to the run.
        """
        self.run_id: str = run_id
        self.tau: float = tau
        self.budget: int = budget
        super().__init__(f"Run {run_id} did not reach M >= {tau} within budget {budget}")


class Missing_Runs_Exception(LM_Memorization_Exception):
    """Exception raised when figure data references runs whose logs are absent or incomplete.

    Attributes:
        run_ids (list[str]): The absent run ids in sorted order.
    """

    def __init__(self, run_ids: Iterable[str]) -> None:
        """Initialize the Missing_Runs_Exception.

        Args:
            run_ids (Iterable[str]): The absent run ids.
        """
        self.run_ids: list[str] = sorted(run_ids)
        super().__init__(f"Missing or incomplete runs: {', '.join(self.run_ids)}")


class Log_Write_Exception(LM_Memorization_Exception):
    """Exception raised when the metric log cannot be written (e.g. the disk is full). The log is rolled back to its last complete record.

    Attributes:
        path (str): The log file being written.
    """

    def __init__(self, path: str, error: OSError) -> None:
        """Initialize the Log_Write_Exception.

        Args:
            path (str): The log file being written.
            error (OSError): The underlying operating system error.
        """
        self.path: str = path
        super().__init__(f"Could not append to {path}: {error}")
