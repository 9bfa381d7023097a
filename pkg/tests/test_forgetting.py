"""Tests for forgetting curves, injection scheduling and the special-batch runs."""

import tempfile
from unittest import TestCase

import numpy as np

from lm_memorization.corpus_pipeline.Packed_Dataset import dataset_from_ids
from lm_memorization.corpus_pipeline.Vocabulary import SPECIAL_TOKENS, Vocabulary
from lm_memorization.experiment_harness.forgetting import base_config, check_disjoint, injection_epoch_at, run_forgetting
from lm_memorization.experiment_harness.Forgetting_Curve import Forgetting_Curve, forgetting_curve
from lm_memorization.experiment_harness.metric_log import INJECTION_KIND, METRICS_FILE, is_complete, read_records
from lm_memorization.experiment_harness.Run_Config import Experiment_Kind
from lm_memorization.experiment_harness.Trainer import Injection_Plan
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Setup_Exception
from resources.test_loggers import get_test_training_logger, get_test_warning_logger
from resources.tiny_runs import tiny_config


def _curve(memorization: list[float]) -> Forgetting_Curve:
    epochs = tuple(range(2, 2 + len(memorization)))
    return Forgetting_Curve("run", (2,), epochs, tuple(memorization), tuple(1.0 + m for m in memorization))


def _records(values: dict[int, float], injected_at: int) -> list[dict]:
    records: list[dict] = []
    for epoch in range(1, max(values) + 1):
        records.append({"run_id": "run", "kind": "epoch", "index": epoch, "M": 0.5, "special_M": values.get(epoch) if epoch > injected_at else None, "special_ppl": 3.0 if epoch > injected_at else None})
        if epoch == injected_at:
            records.append({"run_id": "run", "kind": INJECTION_KIND, "index": epoch, "special_M": values[epoch], "special_ppl": 2.0})
    return records


class TestForgettingCurve(TestCase):

    def test_baseline_is_the_lowest_point(self):
        curve = _curve([0.9, 0.5, 0.42, 0.40, 0.41])
        self.assertEqual(curve.baseline, 0.40)
        self.assertEqual(curve.baseline_epoch, 5)

    def test_diff_of_consecutive_points(self):
        self.assertTrue(np.allclose(_curve([0.5, 0.4, 0.35]).diff(), [-0.10, -0.05]))

    def test_curve_from_log_records(self):
        curve = forgetting_curve(_records({2: 0.9, 3: 0.6, 4: 0.5}, injected_at=2))
        self.assertEqual(curve.injection_epochs, (2,))
        self.assertEqual(curve.epochs, (2, 3, 4))
        self.assertEqual(curve.memorization, (0.9, 0.6, 0.5))
        self.assertEqual(curve.perplexity, (2.0, 3.0, 3.0))

    def test_log_without_injection(self):
        with self.assertRaises(Setup_Exception):
            forgetting_curve([{"run_id": "run", "kind": "epoch", "index": 1, "M": 0.1}])


class TestInjectionScheduling(TestCase):

    def test_injection_epoch_at_fraction(self):
        self.assertEqual(injection_epoch_at(0.2, 10), 2)
        self.assertEqual(injection_epoch_at(0.5, 10), 5)
        self.assertEqual(injection_epoch_at(0.01, 10), 1)
        self.assertEqual(injection_epoch_at(1.0, 10), 9)

    def test_spaced_injection_plan(self):
        with tempfile.TemporaryDirectory() as root:
            config = tiny_config(root, max_epochs=10, inject_epoch=2, spacing_period=3, experiment="repetition")
            self.assertEqual(Injection_Plan.from_config(config).epochs, (2, 5, 8))
            self.assertEqual(Injection_Plan.from_config(config.with_changes(spacing_period=None)).epochs, (2,))

    def test_default_injection_epoch(self):
        with tempfile.TemporaryDirectory() as root:
            self.assertEqual(tiny_config(root, max_epochs=10).resolved_inject_epoch, 2)

    def test_arms_share_one_base_run(self):
        with tempfile.TemporaryDirectory() as root:
            single = tiny_config(root, experiment="forgetting", inject_epoch=1)
            repeated = single.with_changes(repetitions=3, experiment=Experiment_Kind.repetition)
            self.assertNotEqual(single.resolved_run_id, repeated.resolved_run_id)
            self.assertEqual(base_config(single).resolved_run_id, base_config(repeated).resolved_run_id)


class TestDisjointSpecialBatch(TestCase):

    def test_overlap_is_rejected(self):
        vocabulary = Vocabulary(SPECIAL_TOKENS + ("a", "b", "c"))
        train = dataset_from_ids([[4, 5], [5, 6]], vocabulary)
        with self.assertRaises(Setup_Exception):
            check_disjoint(train, dataset_from_ids([[6, 4], [5, 6]], vocabulary, name="valid"))
        check_disjoint(train, dataset_from_ids([[6, 4]], vocabulary, name="valid"))


class TestRunForgetting(TestCase):

    def test_curve_starts_at_the_injection(self):
        with tempfile.TemporaryDirectory() as root:
            config = tiny_config(root, experiment="forgetting", max_epochs=4, inject_epoch=1)
            curve = run_forgetting(config, get_test_training_logger(), get_test_warning_logger())
            self.assertEqual(curve.injection_epochs, (1,))
            self.assertEqual(curve.epochs, (1, 2, 3, 4))
            self.assertTrue(all(0.0 <= m <= 1.0 for m in curve.memorization))
            self.assertTrue(is_complete(config.run_dir / METRICS_FILE))
            self.assertTrue(is_complete(base_config(config).run_dir / METRICS_FILE))
            kinds = [record["kind"] for record in read_records(config.run_dir / METRICS_FILE)]
            self.assertEqual(kinds.count(INJECTION_KIND), 1)
            self.assertEqual(run_forgetting(config), curve)

    def test_special_batch_is_required(self):
        with tempfile.TemporaryDirectory() as root:
            with self.assertRaises(Setup_Exception):
                run_forgetting(tiny_config(root, experiment="forgetting", inject_epoch=1, valid_path=None))

    def test_schedule_continues_through_the_injection(self):
        with tempfile.TemporaryDirectory() as root:
            config = tiny_config(root, experiment="forgetting", max_epochs=4, inject_epoch=2)
            run_forgetting(config, get_test_training_logger(), get_test_warning_logger())
            base_updates = [record for record in read_records(base_config(config).run_dir / METRICS_FILE) if record["kind"] == "update"]
            arm_updates = [record for record in read_records(config.run_dir / METRICS_FILE) if record["kind"] == "update"]
            trained = [record["lr"] for record in arm_updates if record["phase"] == "train"]
            injected = [record["lr"] for record in arm_updates if record["phase"] == "inject"]
            self.assertEqual(trained, [record["lr"] for record in base_updates])
            self.assertGreater(len(injected), 0)
            rate_at_injection = [record["lr"] for record in base_updates if record["epoch"] == 2][-1]
            self.assertTrue(all(rate == rate_at_injection for rate in injected))
            self.assertEqual(trained[-1], 0.0)
