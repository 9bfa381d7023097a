"""Tests for the sweep drivers and the figure tables built from their logs."""

import tempfile
import warnings
from pathlib import Path
from unittest import TestCase

import pandas as pd

from lm_memorization.experiment_harness.figure_data import emit_figure_data, figure_tables
from lm_memorization.experiment_harness.metric_log import COMPLETE_KIND, METRICS_FILE, read_records
from lm_memorization.experiment_harness.sweeps import run_docid_experiment, run_lr_sweep, run_scaling_sweep
from lm_memorization.experiment_harness.Trainer import run_training
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Missing_Runs_Exception
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.lm_memorization_warnings.LM_Memorization_Warning import LM_Memorization_Warning
from resources.tiny_runs import tiny_config


class TestLearningRateGrid(TestCase):

    def test_grid_must_span_an_order_of_magnitude(self):
        with tempfile.TemporaryDirectory() as root:
            with self.assertRaises(Config_Exception):
                run_lr_sweep(tiny_config(root), ["desk-tiny"], [1e-3, 3e-3, 5e-3])
            with self.assertRaises(Config_Exception):
                run_lr_sweep(tiny_config(root), ["desk-tiny"], [0.0, 1e-2])


class TestScalingSweep(TestCase):

    def setUp(self):
        self._directory = tempfile.TemporaryDirectory()
        self.addCleanup(self._directory.cleanup)
        self.root = self._directory.name
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LM_Memorization_Warning)
            self.result = run_scaling_sweep(tiny_config(self.root, max_epochs=2, taus=(0.5, 0.9)), ["desk-tiny", "desk-small"])

    def test_one_run_per_size(self):
        entries = self.result.summary.runs
        self.assertEqual([entry.preset for entry in entries], ["desk-tiny", "desk-small"])
        self.assertLess(entries[0].param_count, entries[1].param_count)
        self.assertEqual(len(self.result.crossings()), 4)
        self.assertEqual(len(self.result.crossing_table()), 2)

    def test_t_vs_n_table(self):
        table = figure_tables(self.root, ["fig1"])["fig1"]
        self.assertEqual(len(table), 4)
        self.assertEqual(sorted(set(table["tau"])), [0.5, 0.9])
        self.assertTrue(table["param_count"].is_monotonic_increasing)
        for _, row in table.iterrows():
            self.assertEqual(row["reached"], not pd.isna(row["T"]))
            self.assertEqual(row["budget"], 2)

    def test_reemission_is_byte_identical(self):
        first = emit_figure_data(self.root, Path(self.root) / "first", ["fig1", "fig4", "fig17"])
        second = emit_figure_data(self.root, Path(self.root) / "second", ["fig1", "fig4", "fig17"])
        self.assertEqual(first["fig1"].name, "fig1_t_vs_n.csv")
        for figure, path in first.items():
            self.assertEqual(path.read_bytes(), second[figure].read_bytes(), figure)

    def test_unknown_figure(self):
        with self.assertRaises(Config_Exception):
            figure_tables(self.root, ["fig99"])

    def test_missing_run_log(self):
        run_id = self.result.summary.runs[0].run_id
        (Path(self.root) / run_id / "metrics.jsonl").unlink()
        with self.assertRaises(Missing_Runs_Exception):
            figure_tables(self.root, ["fig1"])


class TestDocIdExperiment(TestCase):

    def test_arms_differ_in_vocabulary(self):
        with tempfile.TemporaryDirectory() as root:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LM_Memorization_Warning)
                result = run_docid_experiment(tiny_config(root, max_epochs=2))
            sizes = {entry.arm: entry.param_count for entry in result.summary.runs}
            self.assertEqual(set(sizes), {"control", "vocab-only", "prepend"})
            self.assertGreater(sizes["vocab-only"], sizes["control"])
            self.assertGreater(sizes["prepend"], sizes["vocab-only"])
            table = figure_tables(root, ["fig8"])["fig8"]
            self.assertEqual(set(table["arm"]), {"control", "vocab-only", "prepend"})

    def test_control_arm_is_the_plain_run(self):
        def _log(path: Path) -> list[dict]:
            return [{key: value for key, value in record.items() if key != "run_id"} for record in read_records(path) if record["kind"] != COMPLETE_KIND]

        with tempfile.TemporaryDirectory() as docid_root, tempfile.TemporaryDirectory() as plain_root:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LM_Memorization_Warning)
                result = run_docid_experiment(tiny_config(docid_root, max_epochs=2, max_seq_len=12))
                plain = tiny_config(plain_root, max_epochs=2, max_seq_len=12)
                run_training(plain)
            control = next(entry for entry in result.summary.runs if entry.arm == "control")
            self.assertEqual(_log(Path(docid_root) / control.run_id / METRICS_FILE), _log(plain.run_dir / METRICS_FILE))
