"""Masked-language-model corruption of packed sequences.

Each sequence's layout is drawn from a generator seeded by (seed, stream, sequence_id), so layouts do not depend on the order sequences are visited.
Training redraws layouts per epoch through the stream argument; evaluation uses one frozen stream for the whole run.
"""

from __future__ import annotations

from collections.abc import Iterable
from enum import Enum

import numpy as np

from lm_memorization.corpus_pipeline.Packed_Sequence import Mask_Corruption, Mask_Layout, Packed_Sequence
from lm_memorization.corpus_pipeline.Vocabulary import MASK_ID, SPECIAL_TOKENS, Vocabulary
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception

DEFAULT_MASK_PROBABILITY = 0.15
EVALUATION_STREAM = -1


class MLM_Corruption(Enum):
    """How masked positions are corrupted."""

    mask_only = "mask_only"  # Every masked position reads the mask token.
    bert_80_10_10 = "bert_80_10_10"  # 80% mask token, 10% random word, 10% unchanged.

    def __str__(self) -> str:
        return self.value


def maskable_positions(sequence: Packed_Sequence, vocabulary: Vocabulary) -> np.ndarray:
    """
    Args:
        sequence (Packed_Sequence): A sequence.
        vocabulary (Vocabulary): The vocabulary of the sequence.

    Returns:
        np.ndarray: Positions that hold neither a special token, a docid identifier, nor part of the docid prefix.
    """
    ids = sequence.token_ids
    eligible = ids >= len(SPECIAL_TOKENS)
    if vocabulary.doc_id_start is not None:
        eligible &= ids < vocabulary.doc_id_start
    eligible[: sequence.prefix_length] = False
    return np.flatnonzero(eligible)


def apply_mlm_mask(
    sequence: Packed_Sequence,
    vocabulary: Vocabulary,
    p: float = DEFAULT_MASK_PROBABILITY,
    seed: int = 0,
    stream: int = EVALUATION_STREAM,
    corruption: MLM_Corruption = MLM_Corruption.mask_only,
) -> Packed_Sequence:
    """Mask each eligible position independently with probability p.

    Args:
        sequence (Packed_Sequence): A sequence without a mask layout.
        vocabulary (Vocabulary): The vocabulary, used to exclude special and docid ids and to draw random replacements.
        p (float, optional): Mask probability. Defaults to 0.15.
        seed (int, optional): The mask seed. Defaults to 0.
        stream (int, optional): Independent draw index, e.g. the training epoch. Defaults to the evaluation stream.
        corruption (MLM_Corruption, optional): Replacement rule for masked positions. Defaults to mask-token only.

    Returns:
        Packed_Sequence: The sequence with its mask layout.

    Raises:
        Config_Exception: If the sequence already has a layout or p is outside [0, 1].
    """
    if sequence.mask_layout is not None:
        raise Config_Exception(f"Sequence {sequence.sequence_id} already has a mask layout")
    if not 0.0 <= p <= 1.0:
        raise Config_Exception(f"Mask probability must lie in [0, 1] but got {p}")
    rng = np.random.default_rng([seed, stream + 1, sequence.sequence_id])
    candidates = maskable_positions(sequence, vocabulary)
    positions = candidates[rng.random(candidates.size) < p]
    originals = sequence.token_ids[positions]
    replacements = np.full(positions.size, MASK_ID, dtype=np.int64)
    codes = np.full(positions.size, Mask_Corruption.mask.value, dtype=np.int8)
    if corruption is MLM_Corruption.bert_80_10_10 and positions.size:
        draws = rng.random(positions.size)
        word_end = len(vocabulary) if vocabulary.doc_id_start is None else vocabulary.doc_id_start
        randoms = rng.integers(len(SPECIAL_TOKENS), word_end, size=positions.size)
        random_slots = (draws >= 0.8) & (draws < 0.9)
        keep_slots = draws >= 0.9
        replacements[random_slots] = randoms[random_slots]
        replacements[keep_slots] = originals[keep_slots]
        codes[random_slots] = Mask_Corruption.random.value
        codes[keep_slots] = Mask_Corruption.keep.value
    return sequence.with_mask_layout(Mask_Layout(positions.astype(np.int64), originals.copy(), replacements, codes))


def mask_dataset(
    sequences: Iterable[Packed_Sequence],
    vocabulary: Vocabulary,
    p: float = DEFAULT_MASK_PROBABILITY,
    seed: int = 0,
    stream: int = EVALUATION_STREAM,
    corruption: MLM_Corruption = MLM_Corruption.mask_only,
) -> list[Packed_Sequence]:
    """
    Args:
        sequences (Iterable[Packed_Sequence]): Sequences to mask; any existing layout is replaced.
        vocabulary (Vocabulary): The vocabulary of the sequences.
        p (float, optional): Mask probability. Defaults to 0.15.
        seed (int, optional): The mask seed. Defaults to 0.
        stream (int, optional): Independent draw index. Defaults to the evaluation stream.
        corruption (MLM_Corruption, optional): Replacement rule. Defaults to mask-token only.

    Returns:
        list[Packed_Sequence]: The masked sequences in the same order.
    """
    return [apply_mlm_mask(sequence.with_mask_layout(None), vocabulary, p, seed, stream, corruption) for sequence in sequences]
