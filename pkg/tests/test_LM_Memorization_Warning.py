import warnings
from unittest import TestCase

from lm_memorization.corpus_pipeline.Packed_Sequence import pack_sequences
from lm_memorization.corpus_pipeline.Pos_Tag import Pos_Tag
from lm_memorization.experiment_harness.Trainer import routed_warnings
from lm_memorization.experiment_harness.trend_checks import spearman
from lm_memorization.lm_memorization_warnings.LM_Memorization_Warning import (
    LM_Memorization_Warning,
    Spearman_Undefined_Warning,
    Truncated_Sentence_Warning,
    Unknown_Pos_Label_Warning,
)
from lm_memorization.lm_memorization_logging.memorization_logger import Memorization_Warning_Log


class _Recording_Warning_Log(Memorization_Warning_Log):

    def __init__(self):
        super().__init__(log_to_console=False, log_to_file=False, log_name="Recording Warning Log")
        self.received: list[tuple[Warning | str, object]] = []

    def warn(self, warning, source) -> None:
        self.received.append((warning, source))


class TestLM_Memorization_Warning(TestCase):

    def test_warnings_are_runtime_warnings(self):
        self.assertTrue(issubclass(LM_Memorization_Warning, RuntimeWarning))

    def test_truncated_sentence_warning(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            pack_sequences([[list(range(4, 14))]], max_seq_len=4)
            self.assertEqual(len(caught), 1)
            self.assertIs(caught[0].category, Truncated_Sentence_Warning)

    def test_unknown_pos_label_warning(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            self.assertIs(Pos_Tag.from_label("XYZ"), Pos_Tag.OTHER)
            self.assertEqual(len(caught), 1)
            self.assertIs(caught[0].category, Unknown_Pos_Label_Warning)

    def test_constant_series_has_no_rank_correlation(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            self.assertIsNone(spearman([1.0, 2.0, 3.0], [5.0, 5.0, 5.0], "constant"))
            self.assertIs(caught[0].category, Spearman_Undefined_Warning)
        self.assertAlmostEqual(spearman([1.0, 2.0, 3.0], [3.0, 2.0, 1.0], "decreasing"), -1.0)

    def test_warnings_are_routed_to_the_log(self):
        log = _Recording_Warning_Log()
        with routed_warnings(log, "run-1"):
            warnings.warn(Unknown_Pos_Label_Warning("XYZ"), stacklevel=1)
        self.assertEqual(len(log.received), 1)
        warning, source = log.received[0]
        self.assertIsInstance(warning, Unknown_Pos_Label_Warning)
        self.assertEqual(source, "run-1")
