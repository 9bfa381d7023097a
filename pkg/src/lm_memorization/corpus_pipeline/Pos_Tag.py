"""Module containing the Pos_Tag enumeration of tracked part-of-speech classes and the mapping from annotation labels."""

from __future__ import annotations

import warnings
from enum import Enum

from lm_memorization.lm_memorization_warnings.LM_Memorization_Warning import Unknown_Pos_Label_Warning


class Pos_Tag(Enum):
    """Closed enumeration of part-of-speech classes tracked by the memorization metrics."""

    NOUN = "NOUN"
    PROPN = "PROPN"
    NUM = "NUM"
    VERB = "VERB"
    ADJ = "ADJ"
    OTHER = "OTHER"

    def __str__(self) -> str:
        return self.value

    @property
    def code(self) -> int:
        """
        Returns:
            int: A small integer code for storing tags in numpy arrays.
        """
        return _CODES[self]

    @staticmethod
    def from_code(code: int) -> Pos_Tag:
        """
        Args:
            code (int): A code produced by Pos_Tag.code.

        Returns:
            Pos_Tag: The tag with that code.
        """
        return _TAGS[code]

    @staticmethod
    def from_label(label: str) -> Pos_Tag:
        """Map a universal or Penn Treebank label onto a tracked class.

        Args:
            label (str): The annotation label.

        Returns:
            Pos_Tag: The tracked class. Labels of untracked classes map to OTHER; unrecognized labels also map to OTHER and raise an Unknown_Pos_Label_Warning.
        """
        normalized = label.strip().upper()
        if normalized in _LABELS:
            return _LABELS[normalized]
        if normalized.startswith("VB"):
            return Pos_Tag.VERB
        if normalized.startswith("JJ"):
            return Pos_Tag.ADJ
        if normalized not in _KNOWN_OTHER:
            warnings.warn(Unknown_Pos_Label_Warning(label), stacklevel=2)
        return Pos_Tag.OTHER


_TAGS: tuple[Pos_Tag, ...] = tuple(Pos_Tag)
_CODES: dict[Pos_Tag, int] = {tag: code for code, tag in enumerate(_TAGS)}
_LABELS: dict[str, Pos_Tag] = {
    **{tag.value: tag for tag in Pos_Tag},
    "NN": Pos_Tag.NOUN,
    "NNS": Pos_Tag.NOUN,
    "NNP": Pos_Tag.PROPN,
    "NNPS": Pos_Tag.PROPN,
    "CD": Pos_Tag.NUM,
    "MD": Pos_Tag.VERB,
    "AUX": Pos_Tag.VERB,
}
# Universal and Penn Treebank labels of classes that are not tracked.
_KNOWN_OTHER = frozenset(
    {"ADP", "ADV", "CCONJ", "DET", "INTJ", "PART", "PRON", "PUNCT", "SCONJ", "SYM", "X", "SPACE", "CC", "DT", "EX", "FW", "IN", "LS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "TO", "UH", "WDT", "WP", "WP$", "WRB", ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "HYPH", "NFP", "$", "#"}
)
