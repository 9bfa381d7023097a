from unittest import TestCase

from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Alignment_Exception, Doc_Id_Overflow_Exception, Ingestion_Exception
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Missing_Runs_Exception, Setup_Exception, Unreached_Threshold_Exception
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception, Input_Exception, LM_Memorization_Exception, Numeric_Exception
from lm_memorization.transformer_lm.Transformer_Config import Transformer_Config


class TestLM_Memorization_Exception(TestCase):

    def test_message_is_prefixed_with_class_name(self):
        error = Input_Exception("Token ids must lie in [0, 8)", (2, 4))
        self.assertIn("Input_Exception: Token ids must lie in [0, 8) for input of shape (2, 4)", str(error))
        self.assertEqual(error.shape, (2, 4))

    def test_exit_codes(self):
        self.assertEqual(LM_Memorization_Exception("x").exit_code, 1)
        self.assertEqual(Config_Exception("x").exit_code, 2)
        self.assertEqual(Setup_Exception("x").exit_code, 2)
        self.assertEqual(Ingestion_Exception("x").exit_code, 2)
        self.assertEqual(Numeric_Exception("loss").exit_code, 3)
        self.assertEqual(Unreached_Threshold_Exception("run", 0.9, 10).exit_code, 4)

    def test_alignment_is_an_ingestion_failure(self):
        error = Alignment_Exception(12, "dog", "cat")
        self.assertIsInstance(error, Ingestion_Exception)
        self.assertEqual(error.exit_code, 2)

    def test_missing_runs_are_sorted(self):
        self.assertEqual(Missing_Runs_Exception(["b", "a"]).run_ids, ["a", "b"])

    def test_invalid_head_count(self):
        try:
            Transformer_Config(n_layers=1, n_heads=3, d_model=16)
            self.fail("Should have raised an exception")
        except Config_Exception as e:
            self.assertIn("not divisible", str(e))

    def test_overflow_names_the_sequence(self):
        self.assertIn("7", str(Doc_Id_Overflow_Exception(7, 515, 512)))
