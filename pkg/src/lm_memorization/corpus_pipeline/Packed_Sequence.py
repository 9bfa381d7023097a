"""Module containing the Packed_Sequence and Mask_Layout classes and the sentence-respecting greedy packer."""

from __future__ import annotations

import hashlib
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from lm_memorization.corpus_pipeline.Pos_Tag import Pos_Tag
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Doc_Id_Overflow_Exception
from lm_memorization.lm_memorization_warnings.LM_Memorization_Warning import Truncated_Sentence_Warning
from lm_memorization.transformer_lm.Transformer_Config import DEFAULT_MAX_SEQ_LEN


class Mask_Corruption(Enum):
    """What replaces the input id at a masked position."""

    mask = 0  # The mask token.
    random = 1  # A random corpus word.
    keep = 2  # The original id.


@dataclass(frozen=True, eq=False)
class Mask_Layout:
    """The masked positions of one sequence and how each was corrupted.

    Attributes:
        positions (np.ndarray): Sorted int64 positions that are masked.
        original_ids (np.ndarray): The ground-truth ids at those positions.
        replacement_ids (np.ndarray): The ids the model sees at those positions.
        corruption (np.ndarray): Mask_Corruption codes per position.
    """

    positions: np.ndarray
    original_ids: np.ndarray
    replacement_ids: np.ndarray
    corruption: np.ndarray

    def __len__(self) -> int:
        return int(self.positions.size)

    def apply(self, token_ids: np.ndarray) -> np.ndarray:
        """
        Args:
            token_ids (np.ndarray): The uncorrupted sequence.

        Returns:
            np.ndarray: A copy of the sequence with the replacement ids written at the masked positions.
        """
        corrupted = token_ids.copy()
        corrupted[self.positions] = self.replacement_ids
        return corrupted


@dataclass(frozen=True, eq=False)
class Packed_Sequence:
    """A training sequence of whole sentences from one document.

    Attributes:
        sequence_id (int): Index of the sequence in its dataset; also keys its mask randomness.
        token_ids (np.ndarray): int64 token ids, including any docid prefix.
        document_index (int): Index of the source document.
        sentence_offsets (tuple[int, ...]): Start offset of each sentence, relative to the token ids.
        source_positions (np.ndarray): Offset of each token in the exported token stream; -1 for docid prefix tokens.
        truncated (bool): True if the sequence holds a single sentence that was hard-truncated.
        prefix_length (int): Number of leading docid prefix tokens.
        pos_tags (np.ndarray | None): Pos_Tag codes per token, if annotations were ingested.
        mask_layout (Mask_Layout | None): The masked-language-model layout, if one was applied.
    """

    sequence_id: int
    token_ids: np.ndarray
    document_index: int
    sentence_offsets: tuple[int, ...]
    source_positions: np.ndarray
    truncated: bool = False
    prefix_length: int = 0
    pos_tags: np.ndarray | None = field(default=None)
    mask_layout: Mask_Layout | None = field(default=None)

    def __len__(self) -> int:
        return int(self.token_ids.size)

    @property
    def content_ids(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: The token ids without the docid prefix.
        """
        return self.token_ids[self.prefix_length :]

    def input_ids(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: The ids the model reads: the token ids with the mask layout applied, if any.
        """
        return self.token_ids.copy() if self.mask_layout is None else self.mask_layout.apply(self.token_ids)

    def content_hash(self) -> str:
        """
        Returns:
            str: sha256 hex digest of the content ids, used to detect overlap between datasets.
        """
        return hashlib.sha256(np.ascontiguousarray(self.content_ids, dtype="<i8").tobytes()).hexdigest()

    def with_mask_layout(self, layout: Mask_Layout | None) -> Packed_Sequence:
        return replace(self, mask_layout=layout)

    def with_pos_tags(self, tags: np.ndarray) -> Packed_Sequence:
        return replace(self, pos_tags=tags)

    def with_prefix(self, prefix_ids: Sequence[int]) -> Packed_Sequence:
        """
        Args:
            prefix_ids (Sequence[int]): Ids to place before the tokens.

        Returns:
            Packed_Sequence: The sequence with the prefix prepended. Sentence offsets shift by the prefix length, prefix source positions are -1 and prefix tags are OTHER.
        """
        count = len(prefix_ids)
        tags = None if self.pos_tags is None else np.concatenate([np.full(count, Pos_Tag.OTHER.code, dtype=np.int8), self.pos_tags])
        return replace(
            self,
            token_ids=np.concatenate([np.asarray(prefix_ids, dtype=np.int64), self.token_ids]),
            sentence_offsets=tuple(offset + count for offset in self.sentence_offsets),
            source_positions=np.concatenate([np.full(count, -1, dtype=np.int64), self.source_positions]),
            prefix_length=self.prefix_length + count,
            pos_tags=tags,
            mask_layout=None,
        )

    def without_prefix(self) -> Packed_Sequence:
        """
        Returns:
            Packed_Sequence: The sequence with its docid prefix removed.
        """
        count = self.prefix_length
        return replace(
            self,
            token_ids=self.token_ids[count:].copy(),
            sentence_offsets=tuple(offset - count for offset in self.sentence_offsets),
            source_positions=self.source_positions[count:].copy(),
            prefix_length=0,
            pos_tags=None if self.pos_tags is None else self.pos_tags[count:].copy(),
            mask_layout=None,
        )


def pack_sequences(documents: Sequence[Sequence[Sequence[int]]], max_seq_len: int = DEFAULT_MAX_SEQ_LEN, reserved_prefix: int = 0, first_source_position: int = 0) -> list[Packed_Sequence]:
    """Greedily pack whole sentences of each document into sequences.

    A sentence is appended to the current sequence while it fits in the budget of max_seq_len - reserved_prefix tokens; otherwise the current sequence is closed and a new one started.
    Sequences never span documents and never split a sentence. A single sentence longer than the budget is hard-truncated to the budget, flagged, and becomes its own sequence.

    Args:
        documents (Sequence[Sequence[Sequence[int]]]): Token ids per sentence per document, in corpus order.
        max_seq_len (int, optional): Maximum sequence length. Defaults to 512.
        reserved_prefix (int, optional): Tokens kept free at the start of each sequence for a docid prefix. Defaults to 0.
        first_source_position (int, optional): Stream offset of the first token of the first document. Defaults to 0.

    Returns:
        list[Packed_Sequence]: The packed sequences, numbered in order.
    """
    budget = max_seq_len - reserved_prefix
    if budget < 1:
        raise Doc_Id_Overflow_Exception(0, reserved_prefix, max_seq_len)
    sequences: list[Packed_Sequence] = []
    stream_offset = first_source_position

    def _close(document_index: int, sentences: list[tuple[np.ndarray, np.ndarray]], truncated: bool = False) -> None:
        if not sentences:
            return
        offsets, start = [], 0
        for ids, _ in sentences:
            offsets.append(start)
            start += len(ids)
        sequences.append(
            Packed_Sequence(
                sequence_id=len(sequences),
                token_ids=np.concatenate([ids for ids, _ in sentences]).astype(np.int64),
                document_index=document_index,
                sentence_offsets=tuple(offsets),
                source_positions=np.concatenate([positions for _, positions in sentences]).astype(np.int64),
                truncated=truncated,
            )
        )

    for document_index, document in enumerate(documents):
        current: list[tuple[np.ndarray, np.ndarray]] = []
        used = 0
        for sentence in document:
            ids = np.asarray(sentence, dtype=np.int64)
            positions = np.arange(stream_offset, stream_offset + ids.size, dtype=np.int64)
            stream_offset += ids.size
            if ids.size == 0:
                continue
            if ids.size > budget:
                _close(document_index, current)
                current, used = [], 0
                warnings.warn(Truncated_Sentence_Warning(document_index, int(ids.size), budget), stacklevel=2)
                _close(document_index, [(ids[:budget], positions[:budget])], truncated=True)
                continue
            if used + ids.size > budget:
                _close(document_index, current)
                current, used = [], 0
            current.append((ids, positions))
            used += int(ids.size)
        _close(document_index, current)
    return sequences
