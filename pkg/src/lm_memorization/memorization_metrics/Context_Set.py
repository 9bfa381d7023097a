"""Module containing the Context_Set class: the (context, ground-truth token) pairs exact memorization is measured over."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lm_memorization.corpus_pipeline.mlm_masking import DEFAULT_MASK_PROBABILITY, EVALUATION_STREAM, MLM_Corruption, apply_mlm_mask
from lm_memorization.corpus_pipeline.Packed_Dataset import Packed_Dataset
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Ingestion_Exception
from lm_memorization.transformer_lm.Transformer_Config import LM_Task


@dataclass(frozen=True, eq=False)
class Context_Set:
    """A set C of contexts stored column-wise.

    For the causal task a context at position t is the prefix of tokens before t and its target is the token at t, scored from the logits at t - 1.
    For the masked task a context is the whole corrupted sequence and its target is the original token at a masked position t, scored from the logits at t.

    Attributes:
        task (LM_Task): The objective the contexts are defined for.
        inputs (tuple[np.ndarray, ...]): Model input ids of every sequence, indexed by sequence_index.
        sequence_index (np.ndarray): Sequence of each context.
        position (np.ndarray): Target position of each context.
        logit_position (np.ndarray): Position of the logits that score each context.
        target (np.ndarray): Ground-truth token id y of each context.
        sentence_initial (np.ndarray): True where the target starts a sentence.
        pos_tag (np.ndarray | None): Pos_Tag code of each target, or None if the dataset was not annotated.
    """

    task: LM_Task
    inputs: tuple[np.ndarray, ...]
    sequence_index: np.ndarray
    position: np.ndarray
    logit_position: np.ndarray
    target: np.ndarray
    sentence_initial: np.ndarray
    pos_tag: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.target.size)

    @property
    def sequence_count(self) -> int:
        return len(self.inputs)

    def permuted(self, order: np.ndarray) -> Context_Set:
        """
        Args:
            order (np.ndarray): A permutation of the context indices.

        Returns:
            Context_Set: The same contexts in the given order.
        """
        return Context_Set(
            self.task,
            self.inputs,
            self.sequence_index[order],
            self.position[order],
            self.logit_position[order],
            self.target[order],
            self.sentence_initial[order],
            None if self.pos_tag is None else self.pos_tag[order],
        )


def extract_contexts(
    dataset: Packed_Dataset,
    task: LM_Task,
    eval_mask_seed: int = 0,
    mask_probability: float = DEFAULT_MASK_PROBABILITY,
    corruption: MLM_Corruption = MLM_Corruption.mask_only,
) -> Context_Set:
    """Enumerate the context set of a dataset.

    Causal contexts are every position t >= 1 of every sequence. Masked contexts are the masked positions of one layout drawn from eval_mask_seed, so the same contexts are scored at every epoch.
    Docid prefix positions are never targets.

    Args:
        dataset (Packed_Dataset): The packed dataset.
        task (LM_Task): The objective.
        eval_mask_seed (int, optional): Seed of the frozen evaluation mask layout. Defaults to 0.
        mask_probability (float, optional): Mask probability of the evaluation layout. Defaults to 0.15.
        corruption (MLM_Corruption, optional): Replacement rule of the evaluation layout. Defaults to mask-token only.

    Returns:
        Context_Set: The contexts in sequence and position order.

    Raises:
        Ingestion_Exception: If the dataset yields no contexts.
    """
    inputs: list[np.ndarray] = []
    columns: dict[str, list[np.ndarray]] = {"sequence": [], "position": [], "logit": [], "target": [], "initial": [], "tag": []}
    tagged = all(sequence.pos_tags is not None for sequence in dataset.sequences) and len(dataset) > 0
    for index, sequence in enumerate(dataset.sequences):
        starts = np.zeros(len(sequence), dtype=bool)
        starts[list(sequence.sentence_offsets)] = True
        if task is LM_Task.causal:
            inputs.append(sequence.token_ids.copy())
            positions = np.arange(max(1, sequence.prefix_length), len(sequence), dtype=np.int64)
            logits = positions - 1
            targets = sequence.token_ids[positions]
        else:
            masked = apply_mlm_mask(sequence.with_mask_layout(None), dataset.vocabulary, mask_probability, eval_mask_seed, EVALUATION_STREAM, corruption)
            assert masked.mask_layout is not None
            inputs.append(masked.input_ids())
            positions = masked.mask_layout.positions
            logits = positions
            targets = masked.mask_layout.original_ids
        columns["sequence"].append(np.full(positions.size, index, dtype=np.int64))
        columns["position"].append(positions)
        columns["logit"].append(logits)
        columns["target"].append(targets)
        columns["initial"].append(starts[positions])
        if tagged:
            assert sequence.pos_tags is not None
            columns["tag"].append(sequence.pos_tags[positions])
    total = sum(part.size for part in columns["target"])
    if total == 0:
        raise Ingestion_Exception(f"Dataset {dataset.name} yields no {task} contexts")
    return Context_Set(
        task=task,
        inputs=tuple(inputs),
        sequence_index=np.concatenate(columns["sequence"]),
        position=np.concatenate(columns["position"]),
        logit_position=np.concatenate(columns["logit"]),
        target=np.concatenate(columns["target"]).astype(np.int64),
        sentence_initial=np.concatenate(columns["initial"]),
        pos_tag=np.concatenate(columns["tag"]).astype(np.int8) if tagged else None,
    )
