"""Tests for run configuration validation, identity and serialization."""

import json
import os
import tempfile
from pathlib import Path
from unittest import TestCase, mock

from lm_memorization.corpus_pipeline.doc_ids import Doc_Id_Mode
from lm_memorization.experiment_harness.Run_Config import LOG_ROOT_ENV, Experiment_Kind, Run_Config
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.transformer_lm.Transformer_Config import LM_Task
from resources.tiny_runs import TINY_MODEL, tiny_config


class TestRunConfigValidation(TestCase):

    def test_exactly_one_budget(self):
        with self.assertRaises(Config_Exception):
            Run_Config()
        with self.assertRaises(Config_Exception):
            Run_Config(max_epochs=3, max_updates=10)
        self.assertEqual(Run_Config(max_updates=10).max_updates, 10)

    def test_exactly_one_architecture(self):
        with self.assertRaises(Config_Exception):
            Run_Config(max_epochs=1, model=dict(TINY_MODEL))
        with self.assertRaises(Config_Exception):
            Run_Config(max_epochs=1, preset=None)
        with self.assertRaises(Config_Exception):
            Run_Config(max_epochs=1, preset=None, model={"n_layers": 1, "n_heads": 2})

    def test_paper_presets_need_an_override(self):
        with self.assertRaises(Config_Exception):
            Run_Config(max_epochs=1, preset="paper-125M")
        self.assertTrue(Run_Config(max_epochs=1, preset="paper-125M", allow_paper_scale=True).allow_paper_scale)

    def test_thresholds_lie_strictly_inside_the_unit_interval(self):
        for taus in ((0.0,), (1.0,), (0.5, 1.2)):
            with self.assertRaises(Config_Exception):
                Run_Config(max_epochs=1, taus=taus)

    def test_injection_epoch_range(self):
        with self.assertRaises(Config_Exception):
            Run_Config(max_epochs=5, inject_epoch=5)
        with self.assertRaises(Config_Exception):
            Run_Config(max_updates=5, inject_epoch=1)
        self.assertEqual(Run_Config(max_epochs=5, inject_epoch=4).resolved_inject_epoch, 4)
        self.assertEqual(Run_Config(max_epochs=10).resolved_inject_epoch, 2)
        self.assertEqual(Run_Config(max_epochs=2).resolved_inject_epoch, 1)

    def test_enum_fields_accept_their_values(self):
        config = Run_Config(max_epochs=1, task="masked", docid_mode="vocab-only", experiment="docid")
        self.assertIs(config.task, LM_Task.masked)
        self.assertIs(config.docid_mode, Doc_Id_Mode.vocab_only)
        self.assertIs(config.experiment, Experiment_Kind.docid)
        with self.assertRaises(Config_Exception):
            Run_Config(max_epochs=1, task="seq2seq")

    def test_unknown_fields_are_rejected(self):
        with self.assertRaises(Config_Exception):
            Run_Config.from_dict({"max_epochs": 1, "epochs": 3})


class TestRunConfigIdentity(TestCase):

    def test_run_id_follows_the_configuration_hash(self):
        config = Run_Config(max_epochs=3)
        self.assertEqual(config.resolved_run_id, f"train-{config.config_hash[:12]}")
        self.assertEqual(Run_Config(max_epochs=3, run_id="named").resolved_run_id, "named")

    def test_log_location_does_not_change_identity(self):
        first = Run_Config(max_epochs=3, log_root="a")
        second = Run_Config(max_epochs=3, log_root="b", record_wall_time=True)
        self.assertEqual(first.config_hash, second.config_hash)
        self.assertNotEqual(first.config_hash, first.with_changes(seed=1).config_hash)

    def test_log_root_resolution(self):
        with mock.patch.dict(os.environ, {LOG_ROOT_ENV: "/tmp/elsewhere"}):
            self.assertEqual(Run_Config(max_epochs=1).log_root_path, Path("/tmp/elsewhere"))
            self.assertEqual(Run_Config(max_epochs=1, log_root="here").log_root_path, Path("here"))
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(Run_Config(max_epochs=1).log_root_path, Path("runs"))

    def test_model_config_uses_the_built_vocabulary(self):
        with tempfile.TemporaryDirectory() as root:
            model = tiny_config(root).model_config(vocab_size=123)
            self.assertEqual((model.n_layers, model.n_heads, model.d_model, model.vocab_size, model.max_seq_len), (1, 2, 16, 123, 32))
        self.assertEqual(Run_Config(max_epochs=1, preset="desk-small").model_config(500).d_model, 128)


class TestRunConfigSerialization(TestCase):

    def test_dictionary_round_trip(self):
        config = Run_Config(max_epochs=4, task=LM_Task.masked, taus=(0.5, 0.9), docid_mode=Doc_Id_Mode.prepend)
        self.assertEqual(Run_Config.from_dict(config.to_dict()), config)

    def test_resolved_file_holds_the_run_id(self):
        with tempfile.TemporaryDirectory() as root:
            config = Run_Config(max_epochs=2)
            path = config.write_resolved(root)
            values = json.loads(path.read_text(encoding="utf-8"))
            self.assertEqual(values["run_id"], config.resolved_run_id)
            self.assertEqual(Run_Config.from_json_file(path).config_hash, config.config_hash)

    def test_unreadable_file(self):
        with tempfile.TemporaryDirectory() as root:
            path = Path(root) / "bad.json"
            path.write_text("{not json", encoding="utf-8")
            with self.assertRaises(Config_Exception):
                Run_Config.from_json_file(path)
            path.write_text("[1, 2]", encoding="utf-8")
            with self.assertRaises(Config_Exception):
                Run_Config.from_json_file(path)
