"""This module contains exceptions raised while ingesting text, building vocabularies and attaching annotations to packed datasets."""

from __future__ import annotations

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import LM_Memorization_Exception


class Ingestion_Exception(LM_Memorization_Exception):
    """Exception raised when a corpus or annotation file cannot be ingested (empty corpus, unreadable or invalid UTF-8 input)."""

    exit_code = 2


class Alignment_Exception(Ingestion_Exception):
    """Exception raised when a part-of-speech annotation file does not align token-for-token with the exported token stream.

    Attributes:
        offset (int): The first token offset where the annotation diverges from the token stream.
        expected (str | None): The token found in the dataset at that offset, or None if the dataset ended first.
        found (str | None): The token found in the annotation file at that offset, or None if the annotation file ended first.
    """

    def __init__(self, offset: int, expected: str | None, found: str | None) -> None:
        """Initialize the Alignment_Exception.

        Args:
            offset (int): The first token offset where the annotation diverges from the token stream.
            expected (str | None): The dataset token at the offset, None if the dataset ended first.
            found (str | None): The annotated token at the offset, None if the annotation file ended first.
        """
        self.offset: int = offset
        self.expected: str | None = expected
        self.found: str | None = found
        super().__init__(f"Annotation misaligned at token offset {offset}: expected {expected!r} but found {found!r}")


class Doc_Id_Region_Exception(LM_Memorization_Exception):
    """Exception raised when unique document identifiers are added to a vocabulary that already has a docid region."""

    def __init__(self, region_start: int, region_size: int) -> None:
        """Initialize the Doc_Id_Region_Exception.

        Args:
            region_start (int): First id of the existing docid region.
            region_size (int): Size of the existing docid region.
        """
        super().__init__(f"Vocabulary already has a docid region of {region_size} ids starting at {region_start}")


class Doc_Id_Overflow_Exception(LM_Memorization_Exception):
    """Exception raised when prepending the docid prefix would push a sequence beyond the maximum sequence length."""

    def __init__(self, sequence_id: int, length: int, max_seq_len: int) -> None:
        """Initialize the Doc_Id_Overflow_Exception.

        Args:
            sequence_id (int): The sequence that would overflow.
            length (int): The length of the sequence including the prefix.
            max_seq_len (int): The maximum sequence length.
        """
        super().__init__(f"Sequence {sequence_id} would have {length} tokens with its docid prefix but at most {max_seq_len} are allowed; pack with a reserved prefix budget")


class Missing_Pos_Tags_Exception(LM_Memorization_Exception):
    """Exception raised when part-of-speech ratios are requested for contexts whose ground-truth tokens carry no tags."""

    def __init__(self, untagged: int) -> None:
        """Initialize the Missing_Pos_Tags_Exception.

        Args:
            untagged (int): Number of contexts without a tag.
        """
        super().__init__(f"{untagged} contexts have no part-of-speech tag; ingest annotations before computing POS ratios")
