"""A Module containing the Memorization_Logger class and its specialised logs."""

from enum import Enum
from logging import CRITICAL, DEBUG, ERROR, INFO, WARNING, FileHandler, Formatter, Logger, StreamHandler, getLogger
from typing import Any


class Memorization_Logging_Level(Enum):
    """Enumeration of logging levels for Memorization_Logger. Wraps the standard logging levels in the logging package."""

    info = INFO
    debug = DEBUG
    warning = WARNING
    error = ERROR
    critical = CRITICAL

    def __str__(self) -> str:
        return self.name

    def __int__(self) -> int:
        return int(self.value)

    def print(self, message: str, logger: Logger) -> None:
        """
        Prints the message to the appropriate level using the given logger.
        Args:
            message (str): The message to print.
            logger (Logger): The logger to print from.
        """
        if not logger.hasHandlers():
            return
        logger.log(int(self), message)


class Memorization_Logger:
    """
    A wrapping class for logging training progress separately from the python console and from the machine-readable metric log.
    """

    def __init__(self, log_to_console: bool = True, log_to_file: bool = False, logging_level: Memorization_Logging_Level = Memorization_Logging_Level.info, log_name: str = "LM Memorization") -> None:
        """
        Args:
            log_to_console (bool, optional): If True, the logger will output its contents to the python console. Defaults to True.
            log_to_file (bool, optional): If True, the logger will output its contents to a log file. Defaults to False.
            logging_level (Memorization_Logging_Level, optional): The logging level of this logger. Defaults to logging information.
            log_name (str, optional): The name of the logger and the log file produced. Defaults to "LM Memorization".
        """
        self._level: Memorization_Logging_Level = logging_level
        self._logger: Logger = getLogger(f"{log_name}")
        self._logger.setLevel(int(logging_level))
        self._logger.propagate = False
        self._formatter: Formatter = Formatter("LMM-%(levelname)s: %(message)s")
        if not self._logger.handlers:
            if log_to_file:
                file_handler = FileHandler(f"{self.name}.log")
                file_handler.setFormatter(self._formatter)
                self._logger.addHandler(file_handler)
            if log_to_console:
                console_handler = StreamHandler()
                console_handler.setFormatter(self._formatter)
                self._logger.addHandler(console_handler)

    @property
    def name(self) -> str:
        """
        Returns:
            str: The name of this logger.
        """
        return self._logger.name

    @property
    def level(self) -> Memorization_Logging_Level:
        """
        Returns:
            Memorization_Logging_Level: The level this logger prints at.
        """
        return self._level

    def print(self, message: str) -> None:
        """
        Prints the given message using this logger at the set level.
        Args:
            message (str): The message to print.
        """
        self._level.print(message, self._logger)


class Training_Log(Memorization_Logger):
    """
    Used for human-readable progress lines from training runs and sweeps.
    """

    def __init__(self, log_to_console: bool = True, log_to_file: bool = False, log_name: str = "LM Memorization Training"):
        super().__init__(log_to_console, log_to_file, logging_level=Memorization_Logging_Level.info, log_name=log_name)

    def epoch_summary(self, run_id: str, epoch: int, memorization: float, validation_perplexity: float | None) -> None:
        """
        Prints a one-line summary of a completed epoch.
        Args:
            run_id (str): The run the epoch belongs to.
            epoch (int): The 1-based epoch index.
            memorization (float): M(f) over the training contexts at the end of the epoch.
            validation_perplexity (float | None): Validation perplexity at the end of the epoch, if measured.
        """
        ppl = "n/a" if validation_perplexity is None else f"{validation_perplexity:.3f}"
        self.print(f"[{run_id}] epoch {epoch}: M={memorization:.4f} val_ppl={ppl}")


class Memorization_Warning_Log(Memorization_Logger):
    """
    Used for logging warnings raised while preparing data or training.
    """

    def __init__(self, log_to_console: bool = True, log_to_file: bool = False, log_name: str = "LM Memorization Warnings"):
        super().__init__(log_to_console, log_to_file, logging_level=Memorization_Logging_Level.warning, log_name=log_name)

    def warn(self, warning: Warning | str, source: Any) -> None:
        """
        Prints out the given warning message.
        Args:
            warning (Warning | str): The warning to print.
            source (Any): The run or component that is the source of the warning.
        """
        category = warning.__class__.__name__ if isinstance(warning, Warning) else "Warning"
        self.print(f"{source}: {category}: {warning}")


class Memorization_Error_Log(Memorization_Logger):
    """
    Used for logging errors that abort a command.
    """

    def __init__(self, log_to_console: bool = True, log_to_file: bool = False, log_name: str = "LM Memorization Errors"):
        super().__init__(log_to_console, log_to_file, logging_level=Memorization_Logging_Level.error, log_name=log_name)

    def report_error(self, error: BaseException, source: Any) -> None:
        """
        Prints out the given error message.
        Args:
            error (BaseException): The error to report.
            source (Any): The run or command that is the source of the error.
        """
        self.print(f"{source}: {error}")
