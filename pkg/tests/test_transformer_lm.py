"""Tests for the transformer configuration, presets, initialization and forward pass."""

from unittest import TestCase

import numpy as np

from lm_memorization.corpus_pipeline.Packed_Dataset import dataset_from_ids
from lm_memorization.corpus_pipeline.Vocabulary import SPECIAL_TOKENS, Vocabulary
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception, Input_Exception
from lm_memorization.memorization_metrics.Context_Set import extract_contexts
from lm_memorization.memorization_metrics.evaluation import exact_memorization
from lm_memorization.tensor_core.operations import softmax_array
from lm_memorization.transformer_lm.Model_State import build_model, forward
from lm_memorization.transformer_lm.Transformer_Config import LM_Task, Transformer_Config, default_max_lr, desk_grid, is_paper_preset, preset_config, preset_learning_rate


class TestTransformerConfig(TestCase):

    def test_embedding_only_model(self):
        config = Transformer_Config(n_layers=0, n_heads=1, d_model=16, vocab_size=100, positional_embeddings=False)
        self.assertEqual(config.param_count, 100 * 16)

    def test_paper_125m_param_count(self):
        config = preset_config("paper-125M", vocab_size=50257, max_seq_len=512)
        self.assertEqual(config.param_count, 124_046_592)

    def test_desk_tiny_param_count(self):
        self.assertEqual(preset_config("desk-tiny", vocab_size=8192).param_count, 657_152)

    def test_param_count_matches_built_parameters(self):
        for tie in (True, False):
            for layers in (0, 1, 3):
                config = Transformer_Config(n_layers=layers, n_heads=2, d_model=8, vocab_size=20, max_seq_len=6, tie_embeddings=tie)
                model = build_model(config, seed=0)
                self.assertEqual(sum(tensor.size for _name, tensor in model), config.param_count)

    def test_param_count_recomputed_on_change(self):
        config = Transformer_Config(n_layers=1, n_heads=2, d_model=8, vocab_size=20, max_seq_len=6)
        before = config.param_count
        config.vocab_size = 40
        self.assertEqual(config.param_count, before + 20 * 8)

    def test_desk_grid_is_strictly_increasing(self):
        counts = [preset_config(name).param_count for name in desk_grid()]
        self.assertTrue(all(a < b for a, b in zip(counts, counts[1:])))

    def test_heads_must_divide_width(self):
        with self.assertRaises(Config_Exception):
            Transformer_Config(n_layers=1, n_heads=3, d_model=8)

    def test_unknown_preset(self):
        with self.assertRaises(Config_Exception):
            preset_config("desk-enormous")

    def test_paper_presets(self):
        config = preset_config("paper-125M")
        self.assertEqual((config.n_layers, config.n_heads, config.d_model), (12, 12, 768))
        self.assertEqual(preset_learning_rate("paper-125M"), 6.0e-4)
        self.assertTrue(is_paper_preset("paper-13B"))
        self.assertFalse(is_paper_preset("desk-tiny"))
        self.assertIsNone(preset_learning_rate("desk-tiny"))

    def test_default_max_lr_interpolates_geometrically(self):
        self.assertEqual(default_max_lr(1_000), 6.0e-4)
        self.assertEqual(default_max_lr(10**12), 1.0e-4)
        self.assertAlmostEqual(default_max_lr(355_000_000), 3.0e-4)
        between = default_max_lr(int(np.sqrt(125e6 * 355e6)))
        self.assertAlmostEqual(between, np.sqrt(6.0e-4 * 3.0e-4), places=8)


class TestForward(TestCase):

    def setUp(self):
        self.config = Transformer_Config(n_layers=2, n_heads=2, d_model=16, vocab_size=30, max_seq_len=10)

    def test_initialization_is_deterministic(self):
        first = build_model(self.config, seed=7)
        second = build_model(self.config, seed=7)
        for (name, a), (_other, b) in zip(first, second):
            self.assertTrue(np.array_equal(a.data, b.data), name)

    def test_gains_and_biases_start_at_identity(self):
        model = build_model(self.config, seed=0)
        self.assertTrue(np.all(model["layers.0.ln_1.gain"].data == 1.0))
        self.assertTrue(np.all(model["layers.1.ffn.in.bias"].data == 0.0))

    def test_logit_shape(self):
        model = build_model(self.config, seed=0)
        self.assertEqual(forward(model, np.zeros((3, 7), dtype=np.int64)).shape, (3, 7, 30))

    def test_causal_logits_ignore_future_tokens(self):
        model = build_model(self.config, seed=1)
        rng = np.random.default_rng(0)
        for _ in range(100):
            ids = rng.integers(0, 30, size=(1, 10))
            position = int(rng.integers(0, 9))
            changed = ids.copy()
            changed[0, position + 1 :] = rng.integers(0, 30, size=9 - position)
            before = forward(model, ids).data[0, : position + 1]
            after = forward(model, changed).data[0, : position + 1]
            self.assertTrue(np.array_equal(before, after))

    def test_masked_logits_see_future_tokens(self):
        config = self.config.with_changes(task=LM_Task.masked)
        model = build_model(config, seed=1)
        ids = np.arange(10).reshape(1, 10)
        changed = ids.copy()
        changed[0, 9] = 20
        self.assertFalse(np.array_equal(forward(model, ids).data[0, 0], forward(model, changed).data[0, 0]))

    def test_fresh_model_is_near_uniform(self):
        model = build_model(self.config, seed=3)
        ids = np.random.default_rng(1).integers(0, 30, size=(4, 10))
        probabilities = softmax_array(forward(model, ids).data.astype(np.float64))
        entropy = -np.sum(probabilities * np.log(probabilities), axis=-1)
        self.assertTrue(np.all(np.abs(entropy - np.log(30)) < 0.05 * np.log(30)))

    def test_fresh_desk_tiny_memorizes_almost_nothing(self):
        vocabulary = Vocabulary(SPECIAL_TOKENS + tuple(f"w{i}" for i in range(8192 - len(SPECIAL_TOKENS))))
        ids = np.random.default_rng(5).integers(len(SPECIAL_TOKENS), 8192, size=(8, 64))
        contexts = extract_contexts(dataset_from_ids(ids.tolist(), vocabulary, max_seq_len=64), LM_Task.causal)
        model = build_model(preset_config("desk-tiny", vocab_size=8192, max_seq_len=64), seed=0)
        self.assertLess(exact_memorization(model, contexts), 0.05)

    def test_sequence_longer_than_max_raises(self):
        model = build_model(self.config, seed=0)
        with self.assertRaises(Input_Exception):
            forward(model, np.zeros((1, 11), dtype=np.int64))

    def test_id_outside_vocabulary_raises(self):
        model = build_model(self.config, seed=0)
        with self.assertRaises(Input_Exception):
            forward(model, np.array([[1, 30]]))
