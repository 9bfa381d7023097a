"""Part-of-speech stratified memorization ratios R(p) and R_mem(p)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from lm_memorization.corpus_pipeline.pos_annotations import Lexicon_Tagger
from lm_memorization.corpus_pipeline.Pos_Tag import Pos_Tag
from lm_memorization.corpus_pipeline.Vocabulary import Vocabulary
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Missing_Pos_Tags_Exception
from lm_memorization.memorization_metrics.Context_Set import Context_Set
from lm_memorization.memorization_metrics.evaluation import DEFAULT_EVAL_BATCH_SIZE, Evaluation_Result, evaluate_contexts
from lm_memorization.transformer_lm.Model_State import Model_State


@dataclass(frozen=True)
class Pos_Memorization_Record:
    """Per part-of-speech ratios at one epoch.

    Attributes:
        epoch (int): The epoch measured.
        ratios (dict[Pos_Tag, tuple[float, float]]): (R(p), R_mem(p)) for each tag with at least one ground-truth occurrence.
        counts (dict[Pos_Tag, int]): Ground-truth occurrence count of each tag.
    """

    epoch: int
    ratios: dict[Pos_Tag, tuple[float, float]] = field(default_factory=dict)
    counts: dict[Pos_Tag, int] = field(default_factory=dict)

    def r(self, tag: Pos_Tag) -> float:
        return self.ratios[tag][0]

    def r_mem(self, tag: Pos_Tag) -> float:
        return self.ratios[tag][1]

    def to_dict(self) -> dict[str, list[float]]:
        """
        Returns:
            dict[str, list[float]]: {tag: [R, R_mem]} in enumeration order, as written to the metric log.
        """
        return {str(tag): [self.ratios[tag][0], self.ratios[tag][1]] for tag in Pos_Tag if tag in self.ratios}

    @classmethod
    def from_dict(cls, epoch: int, values: dict[str, Any], counts: dict[str, int] | None = None) -> Pos_Memorization_Record:
        ratios = {Pos_Tag(tag): (float(pair[0]), float(pair[1])) for tag, pair in values.items()}
        return cls(epoch, ratios, {Pos_Tag(tag): int(count) for tag, count in (counts or {}).items()})


def predicted_tags(predictions: np.ndarray, contexts: Context_Set, vocabulary: Vocabulary, tagger: Lexicon_Tagger) -> np.ndarray:
    """Tag codes of predicted tokens.

    A prediction equal to the target is the same word in the same context and takes the target's annotated tag; any other prediction is tagged by the lexicon tagger.

    Args:
        predictions (np.ndarray): Predicted id per context.
        contexts (Context_Set): Tagged contexts.
        vocabulary (Vocabulary): Vocabulary of the predicted ids.
        tagger (Lexicon_Tagger): The tagger for predictions.

    Returns:
        np.ndarray: Pos_Tag code per context.
    """
    assert contexts.pos_tag is not None
    codes = np.empty(predictions.size, dtype=np.int8)
    for index, (prediction, initial) in enumerate(zip(predictions.tolist(), contexts.sentence_initial.tolist(), strict=True)):
        codes[index] = tagger.tag(vocabulary.token_of(prediction), initial).code
    exact = predictions == contexts.target
    codes[exact] = contexts.pos_tag[exact]
    return codes


def pos_ratios_from_predictions(predictions: np.ndarray, contexts: Context_Set, vocabulary: Vocabulary, tagger: Lexicon_Tagger, epoch: int = 0) -> Pos_Memorization_Record:
    """
    Args:
        predictions (np.ndarray): Predicted id per context.
        contexts (Context_Set): Contexts whose targets carry tags.
        vocabulary (Vocabulary): Vocabulary of the predicted ids.
        tagger (Lexicon_Tagger): The tagger for predictions.
        epoch (int, optional): The epoch measured. Defaults to 0.

    Returns:
        Pos_Memorization_Record: R(p) and R_mem(p) for every tag that occurs among the targets.

    Raises:
        Missing_Pos_Tags_Exception: If the contexts carry no tags.
    """
    if contexts.pos_tag is None:
        raise Missing_Pos_Tags_Exception(len(contexts))
    predicted = predicted_tags(predictions, contexts, vocabulary, tagger)
    exact = predictions == contexts.target
    ratios: dict[Pos_Tag, tuple[float, float]] = {}
    counts: dict[Pos_Tag, int] = {}
    for tag in Pos_Tag:
        members = contexts.pos_tag == tag.code
        total = int(members.sum())
        if total == 0:
            continue
        counts[tag] = total
        ratios[tag] = (int(np.count_nonzero(predicted[members] == tag.code)) / total, int(np.count_nonzero(exact[members])) / total)
    return Pos_Memorization_Record(epoch, ratios, counts)


def pos_ratios(
    model: Model_State,
    contexts: Context_Set,
    vocabulary: Vocabulary,
    tagger: Lexicon_Tagger,
    epoch: int = 0,
    evaluation: Evaluation_Result | None = None,
    batch_size: int = DEFAULT_EVAL_BATCH_SIZE,
) -> Pos_Memorization_Record:
    """
    Args:
        model (Model_State): The frozen model.
        contexts (Context_Set): Contexts whose targets carry tags.
        vocabulary (Vocabulary): The model's vocabulary.
        tagger (Lexicon_Tagger): The tagger for predictions.
        epoch (int, optional): The epoch measured. Defaults to 0.
        evaluation (Evaluation_Result, optional): A finished evaluation of the same contexts. Defaults to evaluating now.
        batch_size (int, optional): Maximum sequences per forward pass. Defaults to 8.

    Returns:
        Pos_Memorization_Record: R(p) and R_mem(p) for every tag that occurs among the targets.
    """
    if contexts.pos_tag is None:
        raise Missing_Pos_Tags_Exception(len(contexts))
    if evaluation is None:
        evaluation = evaluate_contexts(model, contexts, batch_size)
    return pos_ratios_from_predictions(evaluation.predictions, contexts, vocabulary, tagger, epoch)
