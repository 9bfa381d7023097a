"""Preparation of the datasets a run trains and evaluates on."""

from __future__ import annotations

from dataclasses import dataclass

from lm_memorization.corpus_pipeline.doc_ids import DOC_ID_PREFIX_LENGTH, Doc_Id_Mode, prepend_doc_ids
from lm_memorization.corpus_pipeline.Packed_Dataset import Packed_Dataset, build_dataset, read_corpus, tokenize_corpus
from lm_memorization.corpus_pipeline.pos_annotations import Lexicon_Tagger, ingest_pos_annotations
from lm_memorization.corpus_pipeline.Vocabulary import Vocabulary, build_vocab
from lm_memorization.experiment_harness.Run_Config import Run_Config
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Setup_Exception
from lm_memorization.transformer_lm.Transformer_Config import LM_Task


@dataclass(frozen=True)
class Experiment_Data:
    """The datasets of a run, all encoded with one vocabulary.

    Attributes:
        train (Packed_Dataset): Training sequences.
        valid (Packed_Dataset | None): Validation sequences, if a validation corpus was given.
        vocabulary (Vocabulary): The shared vocabulary, including any docid region.
        tagger (Lexicon_Tagger | None): Tagger for predictions, built when annotations were ingested.
    """

    train: Packed_Dataset
    valid: Packed_Dataset | None
    vocabulary: Vocabulary
    tagger: Lexicon_Tagger | None = None


def prepare_experiment_data(config: Run_Config) -> Experiment_Data:
    """Read, tokenize, encode and pack the run's corpora.

    The vocabulary is built from the whole training corpus, so runs that differ only in data_fraction share V. Annotations are ingested before the fraction is taken since they align with the full token stream.

    Args:
        config (Run_Config): The run configuration.

    Returns:
        Experiment_Data: The prepared datasets.

    Raises:
        Setup_Exception: If no training corpus is configured.
    """
    if config.train_path is None:
        raise Setup_Exception("A training corpus is required")
    corpus = tokenize_corpus(read_corpus(config.train_path))
    vocabulary = build_vocab([[token for sentence in document for token in sentence] for document in corpus], config.vocab_size, config.min_freq)
    reserved = DOC_ID_PREFIX_LENGTH if config.reserve_doc_id_prefix or config.docid_mode is Doc_Id_Mode.prepend else 0
    train = build_dataset(corpus, vocabulary, "train", config.max_seq_len, reserved)
    tagger = None
    if config.annotation_path is not None:
        train = ingest_pos_annotations(train, config.annotation_path)
        tagger = Lexicon_Tagger.from_dataset(train)
    if config.data_fraction < 1.0:
        train = train.first_documents(config.data_fraction)
    train, vocabulary = prepend_doc_ids(train, vocabulary, config.docid_mode)
    valid = None
    if config.valid_path is not None:
        valid = build_dataset(tokenize_corpus(read_corpus(config.valid_path)), vocabulary, "valid", config.max_seq_len, reserved)
    if config.task is LM_Task.masked:
        train = train.with_sequences(train.sequences, mask_seed=config.eval_mask_seed)
        if valid is not None:
            valid = valid.with_sequences(valid.sequences, mask_seed=config.eval_mask_seed)
    return Experiment_Data(train, valid, vocabulary, tagger)
