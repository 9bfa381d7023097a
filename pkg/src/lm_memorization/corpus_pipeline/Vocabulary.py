"""Module containing the Vocabulary class and the frequency-ranked vocabulary builder."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from collections.abc import Iterable, Sequence
from typing import Any

import numpy as np

from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Doc_Id_Region_Exception, Ingestion_Exception
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
MASK_TOKEN = "<mask>"
BOS_TOKEN = "<bos>"
SPECIAL_TOKENS: tuple[str, ...] = (PAD_TOKEN, UNK_TOKEN, MASK_TOKEN, BOS_TOKEN)
PAD_ID, UNK_ID, MASK_ID, BOS_ID = range(len(SPECIAL_TOKENS))


def doc_id_token(index: int) -> str:
    """
    Args:
        index (int): Index of the identifier within the docid region.

    Returns:
        str: The unique identifier token.
    """
    return f"<doc_{index}>"


class Vocabulary:
    """A bijection between tokens and ids over [0, V).

    Ids start with the reserved special tokens, followed by corpus words, followed by the optional docid region of unique identifier tokens.

    Attributes:
        doc_id_start (int | None): First id of the docid region, if present.
        doc_id_size (int): Number of ids in the docid region.
    """

    def __init__(self, tokens: Sequence[str], doc_id_start: int | None = None) -> None:
        """Initialize a Vocabulary.

        Args:
            tokens (Sequence[str]): Tokens in id order, starting with the special tokens.
            doc_id_start (int, optional): First id of the docid region, which extends to the end of the tokens. Defaults to no region.
        """
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise Config_Exception(f"Vocabulary must start with the special tokens {SPECIAL_TOKENS}")
        self._tokens: tuple[str, ...] = tuple(tokens)
        self._ids: dict[str, int] = {token: index for index, token in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise Config_Exception("Vocabulary tokens must be distinct")
        self.doc_id_start: int | None = doc_id_start
        self.doc_id_size: int = 0 if doc_id_start is None else len(self._tokens) - doc_id_start

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens and self.doc_id_start == other.doc_id_start

    def __hash__(self) -> int:
        return hash((self._tokens, self.doc_id_start))

    @property
    def tokens(self) -> tuple[str, ...]:
        """
        Returns:
            tuple[str, ...]: All tokens in id order.
        """
        return self._tokens

    @property
    def size(self) -> int:
        """
        Returns:
            int: The vocabulary size V.
        """
        return len(self._tokens)

    @property
    def word_count(self) -> int:
        """
        Returns:
            int: Number of ids that are neither special tokens nor docid identifiers.
        """
        end = len(self._tokens) if self.doc_id_start is None else self.doc_id_start
        return end - len(SPECIAL_TOKENS)

    def id_of(self, token: str) -> int:
        """
        Args:
            token (str): A token.

        Returns:
            int: The token's id, or the unknown-token id if the token is not in the vocabulary.
        """
        return self._ids.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        """
        Args:
            token_id (int): An id in [0, V).

        Returns:
            str: The token with that id.
        """
        return self._tokens[token_id]

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        """
        Args:
            tokens (Iterable[str]): Tokens to encode.

        Returns:
            np.ndarray: int64 ids, with unknown tokens replaced by the unknown-token id.
        """
        return np.fromiter((self.id_of(token) for token in tokens), dtype=np.int64)

    def decode(self, ids: Iterable[int]) -> list[str]:
        """
        Args:
            ids (Iterable[int]): Ids in [0, V).

        Returns:
            list[str]: The corresponding tokens.
        """
        return [self._tokens[int(i)] for i in ids]

    def is_special(self, token_id: int) -> bool:
        """
        Args:
            token_id (int): An id.

        Returns:
            bool: True for the reserved pad, unk, mask and bos ids.
        """
        return 0 <= token_id < len(SPECIAL_TOKENS)

    def is_doc_id(self, token_id: int) -> bool:
        """
        Args:
            token_id (int): An id.

        Returns:
            bool: True if the id lies in the docid region.
        """
        return self.doc_id_start is not None and self.doc_id_start <= token_id < len(self._tokens)

    def coverage(self, tokens: Sequence[str]) -> float:
        """
        Args:
            tokens (Sequence[str]): A token stream.

        Returns:
            float: Fraction of token occurrences that are in the vocabulary.
        """
        if not tokens:
            return 0.0
        return sum(1 for token in tokens if token in self._ids) / len(tokens)

    def with_words(self, words: Iterable[str]) -> Vocabulary:
        """
        Args:
            words (Iterable[str]): Words to add if missing.

        Returns:
            Vocabulary: A vocabulary with the missing words appended after the existing words. Existing ids are unchanged.

        Raises:
            Doc_Id_Region_Exception: If the vocabulary already has a docid region, which must stay last.
        """
        missing = [word for word in dict.fromkeys(words) if word not in self._ids]
        if not missing:
            return self
        if self.doc_id_start is not None:
            raise Doc_Id_Region_Exception(self.doc_id_start, self.doc_id_size)
        return Vocabulary(self._tokens + tuple(missing))

    def with_doc_id_region(self, size: int) -> Vocabulary:
        """
        Args:
            size (int): Number of unique identifier tokens to add.

        Returns:
            Vocabulary: A vocabulary of size V + size whose last ids form the docid region.

        Raises:
            Doc_Id_Region_Exception: If a docid region is already present.
        """
        if self.doc_id_start is not None:
            raise Doc_Id_Region_Exception(self.doc_id_start, self.doc_id_size)
        return Vocabulary(self._tokens + tuple(doc_id_token(i) for i in range(size)), doc_id_start=len(self._tokens))

    def doc_id(self, index: int) -> int:
        """
        Args:
            index (int): Index of the identifier within the docid region.

        Returns:
            int: The id of that identifier token.
        """
        if self.doc_id_start is None or not 0 <= index < self.doc_id_size:
            raise Config_Exception(f"Docid index {index} is outside the docid region")
        return self.doc_id_start + index

    def vocab_hash(self) -> str:
        """
        Returns:
            str: sha256 hex digest of the tokens in id order and the docid region start.
        """
        payload = json.dumps({"tokens": list(self._tokens), "doc_id_start": self.doc_id_start}, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict[str, Any]:
        return {"tokens": list(self._tokens), "doc_id_start": self.doc_id_start}

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> Vocabulary:
        start = values.get("doc_id_start")
        return cls(list(values["tokens"]), None if start is None else int(start))


def build_vocab(corpus: Iterable[Sequence[str]], max_size: int, min_freq: int = 1) -> Vocabulary:
    """Build a frequency-ranked word-level vocabulary.

    Words are ordered by descending frequency with ties broken lexicographically. Words rarer than min_freq, and words beyond max_size total ids, are left out and encode as the unknown token.

    Args:
        corpus (Iterable[Sequence[str]]): Tokenized documents.
        max_size (int): Maximum vocabulary size including the special tokens.
        min_freq (int, optional): Minimum occurrence count of a retained word. Defaults to 1.

    Returns:
        Vocabulary: The vocabulary, with no docid region.

    Raises:
        Ingestion_Exception: If the corpus has no tokens.
        Config_Exception: If max_size leaves no room for words.
    """
    if max_size <= len(SPECIAL_TOKENS):
        raise Config_Exception(f"Vocabulary size {max_size} leaves no room beyond the {len(SPECIAL_TOKENS)} special tokens")
    counts: Counter[str] = Counter()
    for document in corpus:
        counts.update(document)
    if not counts:
        raise Ingestion_Exception("Cannot build a vocabulary from an empty corpus")
    for special in SPECIAL_TOKENS:
        counts.pop(special, None)
    ranked = sorted((word for word, count in counts.items() if count >= min_freq), key=lambda word: (-counts[word], word))
    return Vocabulary(SPECIAL_TOKENS + tuple(ranked[: max_size - len(SPECIAL_TOKENS)]))
