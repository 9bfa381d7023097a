"""Module contains the base exception of the memorization laboratory and the exceptions raised by the numeric core.

Every exception carries an exit code so that the command line interface can map failures to the documented process exit codes without inspecting messages.
"""

from __future__ import annotations


class LM_Memorization_Exception(Exception):
    """Superclass for all exceptions raised while building data, training models or measuring memorization.

    The message is prefixed with the concrete class name so that collected errors from a sweep read consistently in logs.

    Attributes:
        exit_code (int): The process exit code reported by the command line interface when this exception aborts a command.
    """

    exit_code: int = 1

    def __init__(self, message: str | BaseException) -> None:
        """Initialize the LM_Memorization_Exception.

        Args:
            message (str | BaseException): The error message to display. If this is a string, the message will be prefixed with the error class name.
        """
        super().__init__(str(message) if isinstance(message, BaseException) else f"\n{self.__class__.__name__}: {message}")


class Config_Exception(LM_Memorization_Exception):
    """Exception raised when a model, schedule or run configuration violates its invariants."""

    exit_code = 2


class Numeric_Exception(LM_Memorization_Exception):
    """Exception raised when a NaN or Inf value appears in a forward result, a loss or a gradient.

    Attributes:
        source (str): The name of the operation or parameter where the non-finite value was found.
    """

    exit_code = 3

    def __init__(self, source: str, detail: str = "") -> None:
        """Initialize the Numeric_Exception.

        Args:
            source (str): The name of the operation or parameter where the non-finite value was found.
            detail (str, optional): Additional diagnostic information. Defaults to no detail.
        """
        self.source: str = source
        suffix = f" ({detail})" if detail else ""
        super().__init__(f"Non-finite values produced by {source}{suffix}")


class Undefined_Loss_Exception(LM_Memorization_Exception):
    """Exception raised when every position of a cross-entropy computation is ignored, leaving the mean undefined."""

    def __init__(self) -> None:
        """Initialize the Undefined_Loss_Exception."""
        super().__init__("All positions are ignored so the mean cross-entropy is undefined")


class Tape_Consumed_Exception(LM_Memorization_Exception):
    """Exception raised when backward is replayed on a gradient tape that has already been consumed."""

    def __init__(self) -> None:
        """Initialize the Tape_Consumed_Exception."""
        super().__init__("Gradient tape has already been consumed by a backward pass")


class Input_Exception(LM_Memorization_Exception):
    """Exception raised when model inputs do not fit the model configuration.

    Attributes:
        shape (tuple[int, ...]): The shape of the offending input batch.
    """

    def __init__(self, message: str, shape: tuple[int, ...]) -> None:
        """Initialize the Input_Exception.

        Args:
            message (str): Description of the violated input constraint.
            shape (tuple[int, ...]): The shape of the offending input batch.
        """
        self.shape: tuple[int, ...] = shape
        super().__init__(f"{message} for input of shape {shape}")


class Checkpoint_Exception(LM_Memorization_Exception):
    """Exception raised when a checkpoint file is malformed, from an unknown format version, or fails a blob checksum.

    Attributes:
        path (str): The checkpoint file being read.
    """

    def __init__(self, path: str, reason: str) -> None:
        """Initialize the Checkpoint_Exception.

        Args:
            path (str): The checkpoint file being read.
            reason (str): Why the checkpoint was rejected.
        """
        self.path: str = path
        super().__init__(f"Cannot read checkpoint {path}: {reason}")
