"""Module containing the Packed_Dataset class and the steps that turn a plain-text corpus into one."""

from __future__ import annotations

import json
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from lm_memorization.corpus_pipeline.Packed_Sequence import Packed_Sequence, pack_sequences
from lm_memorization.corpus_pipeline.tokenizer import split_documents, split_sentences, tokenize
from lm_memorization.corpus_pipeline.Vocabulary import Vocabulary
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Ingestion_Exception
from lm_memorization.transformer_lm.Transformer_Config import DEFAULT_MAX_SEQ_LEN

Tokenized_Corpus = list[list[list[str]]]


@dataclass(frozen=True, eq=False)
class Packed_Dataset:
    """A packed dataset with the vocabulary it was encoded with.

    Attributes:
        name (str): Label of the dataset, e.g. "train" or "valid".
        sequences (tuple[Packed_Sequence, ...]): The packed sequences.
        vocabulary (Vocabulary): The vocabulary the sequences are encoded with.
        token_stream (tuple[str, ...]): Every corpus token in order, the stream exported for external tagging.
        document_count (int): Number of source documents.
        max_seq_len (int): The packing length limit.
        mask_seed (int | None): The evaluation mask seed, once a masked-task layout was fixed.
    """

    name: str
    sequences: tuple[Packed_Sequence, ...]
    vocabulary: Vocabulary
    token_stream: tuple[str, ...]
    document_count: int
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    mask_seed: int | None = None

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self) -> Iterator[Packed_Sequence]:
        return iter(self.sequences)

    def __getitem__(self, index: int) -> Packed_Sequence:
        return self.sequences[index]

    @property
    def token_count(self) -> int:
        """
        Returns:
            int: Total number of tokens over all sequences.
        """
        return sum(len(sequence) for sequence in self.sequences)

    @property
    def mean_length(self) -> float:
        """
        Returns:
            float: Mean packed sequence length, 0 for an empty dataset.
        """
        return self.token_count / len(self.sequences) if self.sequences else 0.0

    @property
    def longest(self) -> int:
        return max((len(sequence) for sequence in self.sequences), default=0)

    @property
    def truncated_count(self) -> int:
        return sum(1 for sequence in self.sequences if sequence.truncated)

    def with_sequences(self, sequences: Sequence[Packed_Sequence], vocabulary: Vocabulary | None = None, mask_seed: int | None = None) -> Packed_Dataset:
        """
        Args:
            sequences (Sequence[Packed_Sequence]): Replacement sequences.
            vocabulary (Vocabulary, optional): Replacement vocabulary. Defaults to this dataset's vocabulary.
            mask_seed (int, optional): Replacement evaluation mask seed. Defaults to this dataset's mask seed.

        Returns:
            Packed_Dataset: A copy of this dataset with the given replacements.
        """
        return replace(
            self, sequences=tuple(sequences), vocabulary=self.vocabulary if vocabulary is None else vocabulary, mask_seed=self.mask_seed if mask_seed is None else mask_seed
        )

    def content_hashes(self) -> set[str]:
        """
        Returns:
            set[str]: Content digests of every sequence.
        """
        return {sequence.content_hash() for sequence in self.sequences}

    def first_documents(self, fraction: float) -> Packed_Dataset:
        """
        Args:
            fraction (float): Fraction in (0, 1] of documents to keep.

        Returns:
            Packed_Dataset: The sequences of the first ceil(fraction * documents) documents, renumbered from 0.
        """
        keep = max(1, math.ceil(fraction * self.document_count))
        kept = [sequence for sequence in self.sequences if sequence.document_index < keep]
        return replace(self, sequences=tuple(replace(sequence, sequence_id=i) for i, sequence in enumerate(kept)), document_count=keep)

    def manifest(self) -> dict[str, Any]:
        """
        Returns:
            dict[str, Any]: A JSON-serializable description of the dataset: its sequences with their source offsets, the vocabulary hash and the mask seed.
        """
        return {
            "name": self.name,
            "vocab_hash": self.vocabulary.vocab_hash(),
            "vocab_size": len(self.vocabulary),
            "max_seq_len": self.max_seq_len,
            "mask_seed": self.mask_seed,
            "document_count": self.document_count,
            "token_count": self.token_count,
            "mean_length": self.mean_length,
            "sequences": [
                {
                    "sequence_id": sequence.sequence_id,
                    "document_index": sequence.document_index,
                    "length": len(sequence),
                    "prefix_length": sequence.prefix_length,
                    "source_offset": int(sequence.source_positions[sequence.prefix_length]) if len(sequence) > sequence.prefix_length else None,
                    "truncated": sequence.truncated,
                    "content_hash": sequence.content_hash(),
                }
                for sequence in self.sequences
            ],
        }

    def write_manifest(self, path: str | Path) -> Path:
        """
        Args:
            path (str | Path): Destination file.

        Returns:
            Path: The manifest written as canonical JSON.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.manifest(), sort_keys=True, separators=(",", ":")), encoding="utf-8")
        return path


def read_corpus(path: str | Path) -> str:
    """
    Args:
        path (str | Path): A UTF-8 plain-text corpus.

    Returns:
        str: The corpus text.

    Raises:
        Ingestion_Exception: If the file cannot be read, is not valid UTF-8, or holds no text.
    """
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except OSError as error:
        raise Ingestion_Exception(f"Cannot read corpus {path}: {error}") from error
    except UnicodeDecodeError as error:
        raise Ingestion_Exception(f"Corpus {path} is not valid UTF-8 at byte {error.start}") from error
    if not text.strip():
        raise Ingestion_Exception(f"Corpus {path} is empty")
    return text


def tokenize_corpus(text: str) -> Tokenized_Corpus:
    """
    Args:
        text (str): Corpus text with one document per blank-line-separated block.

    Returns:
        Tokenized_Corpus: Tokens per sentence per document.
    """
    return [[tokenize(sentence) for sentence in split_sentences(document)] for document in split_documents(text)]


def build_dataset(corpus: Tokenized_Corpus, vocabulary: Vocabulary, name: str = "train", max_seq_len: int = DEFAULT_MAX_SEQ_LEN, reserved_prefix: int = 0) -> Packed_Dataset:
    """
    Args:
        corpus (Tokenized_Corpus): Tokens per sentence per document.
        vocabulary (Vocabulary): The vocabulary to encode with.
        name (str, optional): Label of the dataset. Defaults to "train".
        max_seq_len (int, optional): Packing length limit. Defaults to 512.
        reserved_prefix (int, optional): Tokens kept free at the start of each sequence for a docid prefix. Defaults to 0.

    Returns:
        Packed_Dataset: The encoded and packed dataset.

    Raises:
        Ingestion_Exception: If the corpus has no tokens.
    """
    stream = tuple(token for document in corpus for sentence in document for token in sentence)
    if not stream:
        raise Ingestion_Exception(f"Dataset {name} has no tokens")
    encoded = [[vocabulary.encode(sentence) for sentence in document] for document in corpus]
    sequences = pack_sequences(encoded, max_seq_len=max_seq_len, reserved_prefix=reserved_prefix)
    oversized = [sequence.sequence_id for sequence in sequences if len(sequence) > max_seq_len]
    if oversized:
        raise Ingestion_Exception(f"Packed sequences {oversized} exceed {max_seq_len} tokens")
    return Packed_Dataset(name, tuple(sequences), vocabulary, stream, len(corpus), max_seq_len)


def dataset_from_ids(sequences: Sequence[Sequence[int]], vocabulary: Vocabulary, name: str = "train", max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> Packed_Dataset:
    """Build a dataset of one-sentence documents directly from token ids.

    Args:
        sequences (Sequence[Sequence[int]]): Token ids per sequence.
        vocabulary (Vocabulary): The vocabulary the ids belong to.
        name (str, optional): Label of the dataset. Defaults to "train".
        max_seq_len (int, optional): Packing length limit. Defaults to 512.

    Returns:
        Packed_Dataset: One packed sequence per given id list.
    """
    packed = pack_sequences([[list(ids)] for ids in sequences], max_seq_len=max_seq_len)
    stream = tuple(vocabulary.decode(np.concatenate([np.asarray(ids, dtype=np.int64) for ids in sequences]))) if sequences else ()
    return Packed_Dataset(name, tuple(packed), vocabulary, stream, len(sequences), max_seq_len)
