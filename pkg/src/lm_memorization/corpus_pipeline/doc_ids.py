"""Unique document identifiers: the control, vocabulary-only and prepend arms of the identifier experiment."""

from __future__ import annotations

from enum import Enum

from lm_memorization.corpus_pipeline.Packed_Dataset import Packed_Dataset
from lm_memorization.corpus_pipeline.Vocabulary import Vocabulary
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Doc_Id_Overflow_Exception, Doc_Id_Region_Exception

DOC_ID_WORDS: tuple[str, str] = ("document", "ID")
DOC_ID_PREFIX_LENGTH = len(DOC_ID_WORDS) + 1


class Doc_Id_Mode(Enum):
    """The arms of the unique identifier experiment."""

    control = "control"  # Dataset and vocabulary unchanged.
    vocab_only = "vocab-only"  # One identifier per sequence added to the vocabulary but never emitted.
    prepend = "prepend"  # Identifiers added and each sequence prefixed with "document ID <unique id>".

    def __str__(self) -> str:
        return self.value


def prepend_doc_ids(dataset: Packed_Dataset, vocabulary: Vocabulary, mode: Doc_Id_Mode) -> tuple[Packed_Dataset, Vocabulary]:
    """
    Args:
        dataset (Packed_Dataset): The training dataset, packed with a reserved prefix budget when mode is prepend.
        vocabulary (Vocabulary): The dataset's vocabulary.
        mode (Doc_Id_Mode): The experiment arm.

    Returns:
        tuple[Packed_Dataset, Vocabulary]: The dataset and vocabulary of the arm. The control arm returns its inputs unchanged.

    Raises:
        Doc_Id_Region_Exception: If the vocabulary already has a docid region.
        Doc_Id_Overflow_Exception: If a prefixed sequence would exceed the dataset's maximum sequence length.
    """
    if vocabulary.doc_id_start is not None:
        raise Doc_Id_Region_Exception(vocabulary.doc_id_start, vocabulary.doc_id_size)
    if mode is Doc_Id_Mode.control:
        return dataset, vocabulary
    if mode is Doc_Id_Mode.vocab_only:
        extended = vocabulary.with_doc_id_region(len(dataset))
        return dataset.with_sequences(dataset.sequences, extended), extended
    extended = vocabulary.with_words(DOC_ID_WORDS).with_doc_id_region(len(dataset))
    word_ids = [extended.id_of(word) for word in DOC_ID_WORDS]
    prefixed = []
    for index, sequence in enumerate(dataset.sequences):
        if len(sequence) + DOC_ID_PREFIX_LENGTH > dataset.max_seq_len:
            raise Doc_Id_Overflow_Exception(sequence.sequence_id, len(sequence) + DOC_ID_PREFIX_LENGTH, dataset.max_seq_len)
        prefixed.append(sequence.with_prefix([*word_ids, extended.doc_id(index)]))
    return dataset.with_sequences(prefixed, extended), extended
