"""Tests for checkpoint serialization."""

import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Checkpoint_Exception
from lm_memorization.optimizer_schedule.Adam_State import Adam_State
from lm_memorization.transformer_lm.checkpoint import Training_Counters, load_checkpoint, save_checkpoint
from lm_memorization.transformer_lm.Model_State import build_model, forward
from lm_memorization.transformer_lm.Transformer_Config import Transformer_Config


class TestCheckpoint(TestCase):

    def setUp(self):
        self._directory = tempfile.TemporaryDirectory()
        self.path = Path(self._directory.name) / "epoch-0001.ckpt"
        self.config = Transformer_Config(n_layers=1, n_heads=2, d_model=8, vocab_size=12, max_seq_len=6)
        self.model = build_model(self.config, seed=5)
        self.counters = Training_Counters(epoch=3, update=17, tokens_processed=1024, schedule_offset_tokens=512.0, special_tokens=40)

    def tearDown(self):
        self._directory.cleanup()

    def test_round_trip_preserves_forward_outputs(self):
        save_checkpoint(self.path, self.model, self.counters)
        restored, counters, optimizer = load_checkpoint(self.path)
        ids = np.array([[1, 2, 3, 4, 5, 6]])
        self.assertTrue(np.array_equal(forward(self.model, ids).data, forward(restored, ids).data))
        self.assertEqual(counters, self.counters)
        self.assertIsNone(optimizer)
        self.assertEqual(restored.config, self.config)
        self.assertEqual(restored.seed, 5)

    def test_round_trip_with_optimizer(self):
        adam = Adam_State.for_parameters(self.model.parameters)
        adam.step = 4
        adam.first_moments["token_embedding.weight"][0, 0] = 0.25
        save_checkpoint(self.path, self.model, self.counters, adam)
        _model, _counters, restored = load_checkpoint(self.path)
        self.assertIsNotNone(restored)
        self.assertEqual(restored.step, 4)
        self.assertEqual(restored.first_moments["token_embedding.weight"][0, 0], 0.25)

    def test_bad_magic(self):
        self.path.write_bytes(b"not a checkpoint at all")
        with self.assertRaises(Checkpoint_Exception):
            load_checkpoint(self.path)

    def test_corrupted_blob_fails_checksum(self):
        save_checkpoint(self.path, self.model, self.counters)
        raw = bytearray(self.path.read_bytes())
        raw[-1] ^= 0xFF
        self.path.write_bytes(bytes(raw))
        with self.assertRaises(Checkpoint_Exception):
            load_checkpoint(self.path)

    def test_truncated_file(self):
        save_checkpoint(self.path, self.model, self.counters)
        self.path.write_bytes(self.path.read_bytes()[:-10])
        with self.assertRaises(Checkpoint_Exception):
            load_checkpoint(self.path)

    def test_missing_file(self):
        with self.assertRaises(Checkpoint_Exception):
            load_checkpoint(self.path)
