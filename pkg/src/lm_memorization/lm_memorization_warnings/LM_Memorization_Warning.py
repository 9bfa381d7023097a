"""A module containing the base class for memorization laboratory warnings.

These warnings flag situations that are recorded and recovered from rather than aborting a run: truncated sentences, unknown annotation labels, thresholds never reached within budget and similar.
"""

from __future__ import annotations


class LM_Memorization_Warning(RuntimeWarning):
    """Base class for warnings raised by the memorization laboratory.

    Warnings are issued with warnings.warn so that they can be filtered with the standard warning filters or routed into a Memorization_Warning_Log.
    """

    def __init__(self, message: str):
        """Initialize the LM_Memorization_Warning.

        Args:
            message (str): The warning message to display.
        """
        super().__init__(message)


class Truncated_Sentence_Warning(LM_Memorization_Warning):
    """Warning raised when a single sentence is longer than the maximum sequence length and is hard-truncated while packing.

    Attributes:
        document_index (int): The document containing the long sentence.
        length (int): The untruncated sentence length in tokens.
    """

    def __init__(self, document_index: int, length: int, max_seq_len: int):
        """Initialize the Truncated_Sentence_Warning.

        Args:
            document_index (int): The document containing the long sentence.
            length (int): The untruncated sentence length in tokens.
            max_seq_len (int): The length the sentence was truncated to.
        """
        self.document_index: int = document_index
        self.length: int = length
        super().__init__(f"Sentence of {length} tokens in document {document_index} truncated to {max_seq_len} tokens")


class Unknown_Pos_Label_Warning(LM_Memorization_Warning):
    """Warning raised when an annotation file uses a label outside the tracked part-of-speech classes. The label is mapped to OTHER."""

    def __init__(self, label: str):
        """
        Args:
            label (str): The unrecognized annotation label.
        """
        self.label: str = label
        super().__init__(f"Unknown part-of-speech label {label!r} mapped to OTHER")


class Unreached_Threshold_Warning(LM_Memorization_Warning):
    """Warning raised when a run finishes without reaching a memorization threshold. The crossing is recorded as unreached at the run budget."""

    def __init__(self, run_id: str, tau: float, budget: int):
        """
        Args:
            run_id (str): The run that did not reach the threshold.
            tau (float): The threshold.
            budget (int): The number of epochs or updates available to the run.
        """
        super().__init__(f"Run {run_id} unreached at budget {budget} for tau={tau}")


class Empty_Batch_Warning(LM_Memorization_Warning):
    """Warning raised when a masked-language-model batch has no masked positions and is skipped without an update."""

    def __init__(self, epoch: int, batch_index: int):
        super().__init__(f"Batch {batch_index} of epoch {epoch} has no scored positions and was skipped")


class Paper_Scale_Override_Warning(LM_Memorization_Warning):
    """Warning raised when a large-scale preset is trained because the explicit override flag was set."""

    def __init__(self, preset: str, param_count: int):
        super().__init__(f"Training large-scale preset {preset} with {param_count:,} parameters under explicit override")


class Spearman_Undefined_Warning(LM_Memorization_Warning):
    """Warning raised when a rank correlation is requested over a constant series and is reported as undefined."""

    def __init__(self, label: str):
        super().__init__(f"Spearman correlation for {label} is undefined on a constant series")
