"""Teacher-forced evaluation of a frozen model over a context set.

Sequences are grouped by exact length so batches need no padding, and every sequence is scored by a single forward pass.
Argmax ties resolve to the lowest token id.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from lm_memorization.corpus_pipeline.mlm_masking import DEFAULT_MASK_PROBABILITY, MLM_Corruption
from lm_memorization.corpus_pipeline.Packed_Dataset import Packed_Dataset
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Input_Exception
from lm_memorization.memorization_metrics.Context_Set import Context_Set, extract_contexts
from lm_memorization.tensor_core.operations import log_softmax_array
from lm_memorization.transformer_lm.Model_State import Model_State, forward
from lm_memorization.transformer_lm.Transformer_Config import LM_Task

DEFAULT_EVAL_BATCH_SIZE = 8


@dataclass(frozen=True, eq=False)
class Evaluation_Result:
    """Per-context outcome of an evaluation pass, aligned with the evaluated Context_Set.

    Attributes:
        predictions (np.ndarray): Argmax token id per context.
        correct (np.ndarray): True where the prediction equals the target.
        nll (np.ndarray): Negative log-probability of the target per context, in 64-bit precision.
    """

    predictions: np.ndarray
    correct: np.ndarray
    nll: np.ndarray

    @property
    def memorized_count(self) -> int:
        return int(np.count_nonzero(self.correct))

    @property
    def memorization(self) -> float:
        """
        Returns:
            float: The fraction of memorized contexts.
        """
        return self.memorized_count / self.correct.size

    @property
    def perplexity(self) -> float:
        """
        Returns:
            float: exp of the mean negative log-likelihood.
        """
        return math.exp(float(np.mean(self.nll)))


def evaluate_contexts(model: Model_State, contexts: Context_Set, batch_size: int = DEFAULT_EVAL_BATCH_SIZE) -> Evaluation_Result:
    """
    Args:
        model (Model_State): The frozen model.
        contexts (Context_Set): The contexts to score.
        batch_size (int, optional): Maximum sequences per forward pass. Defaults to 8.

    Returns:
        Evaluation_Result: Predictions, correctness and likelihoods aligned with the contexts.
    """
    count = len(contexts)
    predictions = np.empty(count, dtype=np.int64)
    nll = np.empty(count, dtype=np.float64)
    order = np.argsort(contexts.sequence_index, kind="stable")
    sorted_sequences = contexts.sequence_index[order]
    by_length: dict[int, list[int]] = defaultdict(list)
    for sequence in np.unique(sorted_sequences):
        by_length[len(contexts.inputs[sequence])].append(int(sequence))
    for length in sorted(by_length):
        members = by_length[length]
        for start in range(0, len(members), max(1, batch_size)):
            chunk = members[start : start + max(1, batch_size)]
            logits = forward(model, np.stack([contexts.inputs[s] for s in chunk]), contexts.task).data
            for row, sequence in enumerate(chunk):
                lo, hi = np.searchsorted(sorted_sequences, [sequence, sequence + 1])
                indices = order[lo:hi]
                scores = logits[row, contexts.logit_position[indices]]
                predictions[indices] = np.argmax(scores, axis=-1)
                log_probs = log_softmax_array(scores.astype(np.float64))
                nll[indices] = -log_probs[np.arange(indices.size), contexts.target[indices]]
    return Evaluation_Result(predictions, predictions == contexts.target, nll)


def exact_memorization(model: Model_State, contexts: Context_Set, batch_size: int = DEFAULT_EVAL_BATCH_SIZE) -> float:
    """
    Args:
        model (Model_State): The frozen model f.
        contexts (Context_Set): The context set C.
        batch_size (int, optional): Maximum sequences per forward pass. Defaults to 8.

    Returns:
        float: M(f), the fraction of contexts whose argmax prediction equals the ground-truth token.
    """
    return evaluate_contexts(model, contexts, batch_size).memorization


def perplexity(
    model: Model_State,
    dataset: Packed_Dataset | Context_Set,
    task: LM_Task | None = None,
    eval_mask_seed: int = 0,
    mask_probability: float = DEFAULT_MASK_PROBABILITY,
    batch_size: int = DEFAULT_EVAL_BATCH_SIZE,
) -> float:
    """
    Args:
        model (Model_State): The frozen model.
        dataset (Packed_Dataset | Context_Set): A dataset encoded with the model's vocabulary, or its precomputed contexts.
        task (LM_Task, optional): Objective used to enumerate scored positions of a dataset. Defaults to the model's task.
        eval_mask_seed (int, optional): Evaluation mask seed for the masked task. Defaults to 0.
        mask_probability (float, optional): Evaluation mask probability for the masked task. Defaults to 0.15.
        batch_size (int, optional): Maximum sequences per forward pass. Defaults to 8.

    Returns:
        float: exp of the mean token-level cross-entropy over the scored positions.
    """
    if isinstance(dataset, Packed_Dataset):
        contexts = extract_contexts(dataset, model.config.task if task is None else task, eval_mask_seed, mask_probability, MLM_Corruption.mask_only)
    else:
        contexts = dataset
    return evaluate_contexts(model, contexts, batch_size).perplexity


def update_memorization(batch_logits: npt.ArrayLike, batch_targets: npt.ArrayLike, scored_mask: npt.ArrayLike | None = None) -> float:
    """Exact memorization restricted to one training batch, from the logits of that update's forward pass.

    Args:
        batch_logits (npt.ArrayLike): Logits with shape (..., V).
        batch_targets (npt.ArrayLike): Target ids with the leading shape of the logits.
        scored_mask (npt.ArrayLike, optional): True at positions that are contexts. Defaults to every position.

    Returns:
        float: M_update, the fraction of scored positions whose argmax equals the target.

    Raises:
        Input_Exception: If no position is scored.
    """
    logits = np.asarray(batch_logits)
    targets = np.asarray(batch_targets)
    scored = np.ones(targets.shape, dtype=bool) if scored_mask is None else np.asarray(scored_mask, dtype=bool)
    total = int(scored.sum())
    if total == 0:
        raise Input_Exception("No scored positions in the update batch", logits.shape)
    hits = (np.argmax(logits, axis=-1) == targets) & scored
    return int(hits.sum()) / total
