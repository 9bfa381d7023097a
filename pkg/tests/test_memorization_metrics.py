"""Tests for context extraction, exact memorization, thresholds, overfitting, part-of-speech ratios and memory units."""

import math
from unittest import TestCase

import numpy as np

from lm_memorization.corpus_pipeline.doc_ids import DOC_ID_PREFIX_LENGTH, Doc_Id_Mode, prepend_doc_ids
from lm_memorization.corpus_pipeline.Packed_Dataset import build_dataset, dataset_from_ids
from lm_memorization.corpus_pipeline.pos_annotations import Lexicon_Tagger
from lm_memorization.corpus_pipeline.Pos_Tag import Pos_Tag
from lm_memorization.corpus_pipeline.Vocabulary import SPECIAL_TOKENS, Vocabulary
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Missing_Pos_Tags_Exception
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception, Input_Exception
from lm_memorization.memorization_metrics.Context_Set import Context_Set, extract_contexts
from lm_memorization.memorization_metrics.evaluation import evaluate_contexts, exact_memorization, perplexity, update_memorization
from lm_memorization.memorization_metrics.Memorization_History import Crossing_Kind, Epoch_Record, Memorization_History, Update_Record
from lm_memorization.memorization_metrics.memory_units import correctness_bitmaps, memory_unit_lengths, run_lengths
from lm_memorization.memorization_metrics.pos_metrics import pos_ratios_from_predictions
from lm_memorization.memorization_metrics.thresholds import detect_overfit_epoch, memorization_before_overfit, rolling_average, run_crossing, threshold_crossing
from lm_memorization.transformer_lm.Model_State import Model_State, build_model, forward
from lm_memorization.transformer_lm.Transformer_Config import LM_Task, Transformer_Config

WORDS = ("w0", "w1", "w2", "w3")
VOCAB_SIZE = len(SPECIAL_TOKENS) + len(WORDS)


def _bigram_model(successor: dict[int, int], scale: float = 10.0) -> Model_State:
    """A model whose logits at a position depend only on the token there: a lookup table of next tokens."""
    config = Transformer_Config(n_layers=0, n_heads=1, d_model=VOCAB_SIZE, vocab_size=VOCAB_SIZE, max_seq_len=16, tie_embeddings=False, positional_embeddings=False)
    model = build_model(config, seed=0, dtype=np.float64)
    model["token_embedding.weight"].data[...] = np.eye(VOCAB_SIZE)
    table = np.zeros((VOCAB_SIZE, VOCAB_SIZE))
    for token, following in successor.items():
        table[token, following] = scale
    model["output.weight"].data[...] = table
    return model


def _history(values: list[float], perplexities: list[float] | None = None) -> Memorization_History:
    history = Memorization_History("run", param_count=100, epoch_budget=len(values))
    for epoch, value in enumerate(values, start=1):
        history.add_epoch(Epoch_Record(epoch, value, None if perplexities is None else perplexities[epoch - 1]))
    return history


class TestContexts(TestCase):

    def setUp(self):
        self.vocabulary = Vocabulary(SPECIAL_TOKENS + WORDS)

    def test_causal_contexts_cover_every_position_after_the_first(self):
        dataset = dataset_from_ids([[4, 5, 6, 7, 4], [5, 6]], self.vocabulary)
        contexts = extract_contexts(dataset, LM_Task.causal)
        self.assertEqual(len(contexts), 4 + 1)
        self.assertEqual(list(contexts.position[:4]), [1, 2, 3, 4])
        self.assertEqual(list(contexts.logit_position[:4]), [0, 1, 2, 3])
        self.assertEqual(list(contexts.target[:4]), [5, 6, 7, 4])

    def test_masked_contexts_follow_the_frozen_layout(self):
        dataset = dataset_from_ids([[4, 5, 6, 7] * 25 for _ in range(100)], self.vocabulary, max_seq_len=128)
        first = extract_contexts(dataset, LM_Task.masked, eval_mask_seed=9)
        second = extract_contexts(dataset, LM_Task.masked, eval_mask_seed=9)
        self.assertTrue(np.array_equal(first.position, second.position))
        self.assertTrue(np.array_equal(first.position, first.logit_position))
        masked_inputs = sum(int(np.count_nonzero(ids == 2)) for ids in first.inputs)
        self.assertEqual(len(first), masked_inputs)

    def test_docid_prefix_is_never_a_target(self):
        corpus = [[["w0", "w1"], ["w2"]], [["w3", "w3"]]]
        dataset = build_dataset(corpus, self.vocabulary, max_seq_len=8, reserved_prefix=DOC_ID_PREFIX_LENGTH)
        prefixed, _vocabulary = prepend_doc_ids(dataset, self.vocabulary, Doc_Id_Mode.prepend)
        contexts = extract_contexts(prefixed, LM_Task.causal)
        self.assertTrue(np.all(contexts.position >= DOC_ID_PREFIX_LENGTH))
        self.assertEqual(len(contexts), 3 + 2)


class TestExactMemorization(TestCase):

    def setUp(self):
        self.vocabulary = Vocabulary(SPECIAL_TOKENS + WORDS)
        self.dataset = dataset_from_ids([[4, 5, 6, 7]], self.vocabulary)
        self.contexts = extract_contexts(self.dataset, LM_Task.causal)

    def test_hand_enumerated_memorization(self):
        model = _bigram_model({4: 5, 5: 6, 6: 4})
        self.assertAlmostEqual(exact_memorization(model, self.contexts), 2 / 3)

    def test_copying_model_memorizes_everything(self):
        model = _bigram_model({4: 5, 5: 6, 6: 7})
        self.assertEqual(exact_memorization(model, self.contexts), 1.0)

    def test_argmax_ties_go_to_the_lowest_id(self):
        model = _bigram_model({})
        result = evaluate_contexts(model, self.contexts)
        self.assertTrue(np.all(result.predictions == 0))

    def test_uniform_model_perplexity_is_vocabulary_size(self):
        self.assertAlmostEqual(perplexity(_bigram_model({}), self.dataset), VOCAB_SIZE, places=9)

    def test_confident_perfect_model_has_unit_perplexity(self):
        model = _bigram_model({4: 5, 5: 6, 6: 7}, scale=60.0)
        self.assertAlmostEqual(perplexity(model, self.contexts), 1.0, places=9)

    def test_two_outcome_hand_perplexity(self):
        model = _bigram_model({4: 5, 5: 6, 6: 7}, scale=math.log(3.0 * (VOCAB_SIZE - 1)))
        # Each target has probability 3(V-1) / (3(V-1) + V - 1) = 3/4.
        self.assertAlmostEqual(perplexity(model, self.contexts), 4.0 / 3.0, places=9)

    def test_invariant_under_permutation_and_batch_size(self):
        dataset = dataset_from_ids([[4, 5, 6], [7, 4], [5, 5, 6, 7], [6, 7, 4]], self.vocabulary)
        contexts = extract_contexts(dataset, LM_Task.causal)
        model = build_model(Transformer_Config(n_layers=1, n_heads=2, d_model=8, vocab_size=VOCAB_SIZE, max_seq_len=8), seed=4)
        baseline = evaluate_contexts(model, contexts, batch_size=8).memorized_count
        order = np.random.default_rng(0).permutation(len(contexts))
        self.assertEqual(evaluate_contexts(model, contexts.permuted(order), batch_size=1).memorized_count, baseline)

    def test_update_memorization(self):
        logits = np.zeros((1, 4, 3))
        logits[0, [0, 1, 2, 3], [0, 1, 2, 0]] = 1.0
        self.assertEqual(update_memorization(logits, [[0, 1, 2, 0]]), 1.0)
        self.assertEqual(update_memorization(logits, [[0, 1, 0, 1]]), 0.5)
        self.assertEqual(update_memorization(logits, [[0, 1, 0, 1]], [[True, True, False, False]]), 1.0)
        with self.assertRaises(Input_Exception):
            update_memorization(logits, [[0, 1, 0, 1]], np.zeros((1, 4), dtype=bool))


class TestThresholds(TestCase):

    def test_first_crossing_on_non_monotone_history(self):
        history = _history([0.2, 0.5, 0.93, 0.91])
        crossing = threshold_crossing(history, 0.9)
        self.assertTrue(crossing.reached)
        self.assertEqual(crossing.index, 3)

    def test_unreached_threshold(self):
        crossing = threshold_crossing(_history([0.2, 0.5, 0.93, 0.91]), 0.99)
        self.assertFalse(crossing.reached)
        self.assertEqual(crossing.describe(), "unreached at budget 4")

    def test_crossing_is_monotone_in_tau(self):
        history = _history(list(np.random.default_rng(1).random(30)))
        crossings = [threshold_crossing(history, tau) for tau in (0.1, 0.3, 0.5, 0.7, 0.9)]
        reached = [c.index for c in crossings if c.reached]
        self.assertEqual(reached, sorted(reached))

    def test_invalid_tau_and_empty_history(self):
        with self.assertRaises(Config_Exception):
            threshold_crossing(_history([0.5]), 1.0)
        with self.assertRaises(Config_Exception):
            threshold_crossing(Memorization_History("run", 1), 0.5)
        self.assertFalse(run_crossing(Memorization_History("run", 1, epoch_budget=7), 0.5).reached)

    def test_update_axis(self):
        history = Memorization_History("run", 1, update_budget=10)
        for update, value in enumerate([0.1, 0.6, 0.4], start=1):
            history.add_update(Update_Record(update, value, batch_id=update - 1, epoch=1))
        self.assertEqual(threshold_crossing(history, 0.5, Crossing_Kind.update).index, 2)
        self.assertEqual(threshold_crossing(history, 0.5, Crossing_Kind.update, smooth_window=5).index, None)

    def test_crossing_dictionary_round_trip(self):
        crossing = threshold_crossing(_history([0.2, 0.95]), 0.9)
        self.assertEqual(type(crossing).from_dict(crossing.to_dict()), crossing)

    def test_history_rejects_out_of_order_records(self):
        history = _history([0.1, 0.2])
        with self.assertRaises(Config_Exception):
            history.add_epoch(Epoch_Record(2, 0.3))
        with self.assertRaises(Config_Exception):
            history.add_epoch(Epoch_Record(3, 1.5))


class TestRollingAverage(TestCase):

    def test_alternating_series(self):
        self.assertTrue(np.allclose(rolling_average([0, 1, 0, 1, 0, 1], 2), [0, 0.5, 0.5, 0.5, 0.5, 0.5]))

    def test_constant_series(self):
        self.assertTrue(np.array_equal(rolling_average([0.3] * 7), [0.3] * 7))

    def test_matches_brute_force(self):
        series = np.random.default_rng(2).random(50)
        expected = [np.mean(series[max(0, i - 4) : i + 1]) for i in range(50)]
        self.assertTrue(np.array_equal(rolling_average(series, 5), np.array(expected)))

    def test_window_must_be_positive(self):
        with self.assertRaises(Config_Exception):
            rolling_average([1.0], 0)


class TestOverfit(TestCase):

    def test_first_strict_rise(self):
        self.assertEqual(detect_overfit_epoch([10, 8, 7, 7.5, 6]), 4)

    def test_decreasing_perplexity_never_overfits(self):
        self.assertIsNone(detect_overfit_epoch([10, 8, 7, 6]))
        self.assertIsNone(detect_overfit_epoch([10, 10, 10]))

    def test_memorization_before_overfit(self):
        point = memorization_before_overfit(_history([0.1, 0.2, 0.3, 0.4, 0.5], [10, 8, 7, 7.5, 6]))
        self.assertTrue(point.overfit_detected)
        self.assertEqual((point.epoch, point.memorization), (3, 0.3))

    def test_no_overfit_reports_final_epoch(self):
        point = memorization_before_overfit(_history([0.1, 0.2], [10, 9]))
        self.assertFalse(point.overfit_detected)
        self.assertEqual(point.epoch, 2)


class TestPosRatios(TestCase):

    def setUp(self):
        self.vocabulary = Vocabulary(SPECIAL_TOKENS + ("dog", "cat", "runs", "Paris", "7", "red"))
        tags = [Pos_Tag.NOUN, Pos_Tag.NOUN, Pos_Tag.VERB, Pos_Tag.PROPN, Pos_Tag.NUM, Pos_Tag.ADJ]
        self.contexts = Context_Set(
            task=LM_Task.causal,
            inputs=(np.array([4, 4, 5, 6, 7, 8, 9]),),
            sequence_index=np.zeros(6, dtype=np.int64),
            position=np.arange(1, 7),
            logit_position=np.arange(0, 6),
            target=np.array([4, 5, 6, 7, 8, 9]),
            sentence_initial=np.zeros(6, dtype=bool),
            pos_tag=np.array([tag.code for tag in tags], dtype=np.int8),
        )
        self.tagger = Lexicon_Tagger.from_annotations(zip(["dog", "cat", "runs", "red"], [Pos_Tag.NOUN, Pos_Tag.NOUN, Pos_Tag.VERB, Pos_Tag.ADJ]), use_seed_lexicon=False)

    def test_hand_set_of_six_contexts(self):
        predictions = np.array([4, 4, 5, 7, 9, 9])
        record = pos_ratios_from_predictions(predictions, self.contexts, self.vocabulary, self.tagger, epoch=2)
        self.assertEqual(record.ratios[Pos_Tag.NOUN], (1.0, 0.5))
        self.assertEqual(record.ratios[Pos_Tag.VERB], (0.0, 0.0))
        self.assertEqual(record.ratios[Pos_Tag.PROPN], (1.0, 1.0))
        self.assertEqual(record.ratios[Pos_Tag.NUM], (0.0, 0.0))
        self.assertEqual(record.ratios[Pos_Tag.ADJ], (1.0, 1.0))
        self.assertNotIn(Pos_Tag.OTHER, record.ratios)
        self.assertEqual(record.counts[Pos_Tag.NOUN], 2)
        self.assertTrue(all(r_mem <= r for r, r_mem in record.ratios.values()))

    def test_perfect_and_synonym_predictions(self):
        perfect = pos_ratios_from_predictions(self.contexts.target.copy(), self.contexts, self.vocabulary, self.tagger)
        self.assertTrue(all(pair == (1.0, 1.0) for pair in perfect.ratios.values()))
        synonyms = pos_ratios_from_predictions(np.array([5, 4]), self._two_nouns(), self.vocabulary, self.tagger)
        self.assertEqual(synonyms.ratios[Pos_Tag.NOUN], (1.0, 0.0))

    def _two_nouns(self) -> Context_Set:
        return Context_Set(
            LM_Task.causal,
            (np.array([6, 4, 5]),),
            np.zeros(2, dtype=np.int64),
            np.array([1, 2]),
            np.array([0, 1]),
            np.array([4, 5]),
            np.zeros(2, dtype=bool),
            np.full(2, Pos_Tag.NOUN.code, dtype=np.int8),
        )

    def test_untagged_contexts_are_rejected(self):
        contexts = extract_contexts(dataset_from_ids([[4, 5, 6]], self.vocabulary), LM_Task.causal)
        with self.assertRaises(Missing_Pos_Tags_Exception):
            pos_ratios_from_predictions(np.array([4, 5]), contexts, self.vocabulary, self.tagger)


class TestMemoryUnits(TestCase):

    def test_hand_bitmap(self):
        stats = memory_unit_lengths([np.array([1, 1, 0, 1, 1, 1, 0], dtype=bool)])
        self.assertEqual(list(run_lengths(np.array([1, 1, 0, 1, 1, 1, 0]))), [2, 3])
        self.assertEqual(stats.mean_length, 2.5)
        self.assertAlmostEqual(stats.token_weighted_length, 13 / 5)
        self.assertEqual(stats.histogram, {2: 1, 3: 1})
        self.assertEqual(stats.memorized_positions, 5)

    def test_empty_and_full_bitmaps(self):
        empty = memory_unit_lengths([np.zeros(10, dtype=bool)])
        self.assertEqual((empty.mean_length, empty.run_count), (0.0, 0))
        full = memory_unit_lengths([np.ones(431, dtype=bool)])
        self.assertEqual((full.mean_length, full.run_count), (431.0, 1))

    def test_runs_never_cross_sequences(self):
        stats = memory_unit_lengths([np.array([0, 1, 1], dtype=bool), np.array([1, 1, 0], dtype=bool)])
        self.assertEqual(stats.histogram, {2: 2})

    def test_bitmaps_follow_sequences_and_positions(self):
        vocabulary = Vocabulary(SPECIAL_TOKENS + WORDS)
        contexts = extract_contexts(dataset_from_ids([[4, 5, 6], [7, 4, 5, 6]], vocabulary), LM_Task.causal)
        correct = np.array([True, False, True, True, False])
        order = np.random.default_rng(3).permutation(len(contexts))
        bitmaps = correctness_bitmaps(contexts.permuted(order), correct[order])
        self.assertEqual([list(b) for b in bitmaps], [[True, False], [True, True, False]])


class TestRandomInstancesAgainstNaiveLoops(TestCase):
    """Each metric against a plain-loop recomputation on 100 seeded random instances of at most 10 sequences of at most 16 tokens."""

    TRIALS = 100

    def setUp(self):
        self.vocabulary = Vocabulary(SPECIAL_TOKENS + WORDS)
        self.word_ids = [self.vocabulary.id_of(word) for word in WORDS]

    def _sequences(self, rng: np.random.Generator) -> list[list[int]]:
        return [rng.choice(self.word_ids, size=int(rng.integers(2, 17))).tolist() for _ in range(int(rng.integers(1, 11)))]

    def test_exact_memorization(self):
        for trial in range(self.TRIALS):
            rng = np.random.default_rng(trial)
            sequences = self._sequences(rng)
            config = Transformer_Config(n_layers=1, n_heads=2, d_model=8, vocab_size=VOCAB_SIZE, max_seq_len=16)
            model = build_model(config, seed=trial, dtype=np.float64)
            memorized, total = 0, 0
            for ids in sequences:
                logits = forward(model, np.array([ids])).data[0]
                for position in range(1, len(ids)):
                    memorized += int(np.argmax(logits[position - 1]) == ids[position])
                    total += 1
            contexts = extract_contexts(dataset_from_ids(sequences, self.vocabulary, max_seq_len=16), LM_Task.causal)
            self.assertEqual(exact_memorization(model, contexts), memorized / total, f"trial {trial}")

    def test_pos_ratios(self):
        tags = list(Pos_Tag)
        for trial in range(self.TRIALS):
            rng = np.random.default_rng(1000 + trial)
            annotated = [word for word in WORDS if rng.random() < 0.7]
            tagger = Lexicon_Tagger.from_annotations([(word, tags[int(rng.integers(len(tags)))]) for word in annotated], use_seed_lexicon=False)
            size = sum(len(ids) - 1 for ids in self._sequences(rng))
            target = rng.choice(self.word_ids, size=size)
            predictions = np.where(rng.random(size) < 0.5, target, rng.choice(self.word_ids, size=size))
            target_tags = rng.integers(len(tags), size=size)
            initial = rng.random(size) < 0.2
            contexts = Context_Set(
                LM_Task.causal,
                (np.concatenate([[self.word_ids[0]], target]),),
                np.zeros(size, dtype=np.int64),
                np.arange(1, size + 1),
                np.arange(size),
                target,
                initial,
                np.array([tags[i].code for i in target_tags], dtype=np.int8),
            )
            expected: dict[Pos_Tag, tuple[float, float]] = {}
            counts: dict[Pos_Tag, int] = {}
            for tag_index, tag in enumerate(tags):
                members = [i for i in range(size) if target_tags[i] == tag_index]
                if not members:
                    continue
                tag_hits, exact_hits = 0, 0
                for i in members:
                    if predictions[i] == target[i]:
                        tag_hits += 1
                        exact_hits += 1
                    elif tagger.tag(self.vocabulary.token_of(int(predictions[i])), bool(initial[i])) is tag:
                        tag_hits += 1
                expected[tag] = (tag_hits / len(members), exact_hits / len(members))
                counts[tag] = len(members)
            record = pos_ratios_from_predictions(predictions, contexts, self.vocabulary, tagger)
            self.assertEqual(record.ratios, expected, f"trial {trial}")
            self.assertEqual(record.counts, counts, f"trial {trial}")

    def test_memory_unit_lengths(self):
        for trial in range(self.TRIALS):
            rng = np.random.default_rng(2000 + trial)
            bitmaps = [rng.random(int(rng.integers(1, 17))) < rng.random() for _ in range(int(rng.integers(1, 11)))]
            runs: list[int] = []
            for bitmap in bitmaps:
                current = 0
                for flag in bitmap:
                    if flag:
                        current += 1
                    elif current:
                        runs.append(current)
                        current = 0
                if current:
                    runs.append(current)
            stats = memory_unit_lengths(bitmaps)
            self.assertEqual(stats.run_count, len(runs), f"trial {trial}")
            self.assertEqual(stats.histogram, {length: runs.count(length) for length in sorted(set(runs))}, f"trial {trial}")
            if runs:
                self.assertAlmostEqual(stats.mean_length, sum(runs) / len(runs), places=12)
                self.assertAlmostEqual(stats.token_weighted_length, sum(length * length for length in runs) / sum(runs), places=12)
            else:
                self.assertEqual(stats.mean_length, 0.0)

    def test_threshold_crossing(self):
        for trial in range(self.TRIALS):
            rng = np.random.default_rng(3000 + trial)
            values = rng.random(int(rng.integers(1, 31))).tolist()
            tau = float(rng.uniform(0.05, 0.95))
            expected = next((epoch for epoch, value in enumerate(values, start=1) if value >= tau), None)
            crossing = threshold_crossing(_history(values), tau)
            self.assertEqual(crossing.index, expected, f"trial {trial}")
            self.assertEqual(crossing.budget, len(values))

            history = Memorization_History("run", 1, update_budget=len(values))
            for update, value in enumerate(values, start=1):
                history.add_update(Update_Record(update, value, batch_id=update - 1, epoch=1))
            smoothed = [np.mean(values[max(0, i - 4) : i + 1]) for i in range(len(values))]
            expected = next((update for update, value in enumerate(smoothed, start=1) if value >= tau), None)
            self.assertEqual(threshold_crossing(history, tau, Crossing_Kind.update, smooth_window=5).index, expected, f"trial {trial}")

    def test_detect_overfit_epoch(self):
        for trial in range(self.TRIALS):
            rng = np.random.default_rng(4000 + trial)
            perplexities = rng.integers(1, 6, size=int(rng.integers(1, 21))).astype(float).tolist()
            expected = None
            for epoch in range(2, len(perplexities) + 1):
                if perplexities[epoch - 1] > perplexities[epoch - 2]:
                    expected = epoch
                    break
            self.assertEqual(detect_overfit_epoch(perplexities), expected, f"trial {trial}")
            memorization = rng.random(len(perplexities)).tolist()
            point = memorization_before_overfit(_history(memorization, perplexities))
            before = len(perplexities) if expected is None else expected - 1
            self.assertEqual((point.epoch, point.memorization, point.overfit_detected), (before, memorization[before - 1], expected is not None), f"trial {trial}")
