"""Tests for tokenization, vocabulary building, sequence packing, masking and document identifiers."""

import tempfile
import warnings
from pathlib import Path
from unittest import TestCase

import numpy as np

from lm_memorization.corpus_pipeline.doc_ids import DOC_ID_PREFIX_LENGTH, Doc_Id_Mode, prepend_doc_ids
from lm_memorization.corpus_pipeline.mlm_masking import MLM_Corruption, apply_mlm_mask, maskable_positions, mask_dataset
from lm_memorization.corpus_pipeline.Packed_Dataset import build_dataset, dataset_from_ids, read_corpus, tokenize_corpus
from lm_memorization.corpus_pipeline.Packed_Sequence import Mask_Corruption, pack_sequences
from lm_memorization.corpus_pipeline.tokenizer import detokenize, split_documents, split_sentences, tokenize
from lm_memorization.corpus_pipeline.Vocabulary import MASK_ID, SPECIAL_TOKENS, UNK_ID, Vocabulary, build_vocab
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Doc_Id_Overflow_Exception, Doc_Id_Region_Exception, Ingestion_Exception
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.lm_memorization_warnings.LM_Memorization_Warning import Truncated_Sentence_Warning
from resources.load_test_resources import load_test_resource


class TestTokenizer(TestCase):

    def test_punctuation_is_glued(self):
        self.assertEqual(tokenize("Hello, world."), ["Hello", "##,", "world", "##."])

    def test_detokenize_restores_normalized_text(self):
        text = "The fox (quick)  jumps; over 3.5 dogs!"
        self.assertEqual(detokenize(tokenize(text)), "The fox (quick) jumps; over 3.5 dogs!")

    def test_split_documents_on_blank_lines(self):
        self.assertEqual(split_documents("one.\n\n  \ntwo. three.\n\n"), ["one.", "two. three."])

    def test_split_sentences_after_terminal_punctuation(self):
        self.assertEqual(split_sentences("A b. C d! E f? G"), ["A b.", "C d!", "E f?", "G"])


class TestVocabulary(TestCase):

    def test_frequency_ranking_with_lexicographic_ties(self):
        vocabulary = build_vocab([["b", "a", "c", "c"], ["a", "d"]], max_size=10)
        self.assertEqual(vocabulary.tokens[len(SPECIAL_TOKENS) :], ("a", "c", "b", "d"))

    def test_max_size_and_unknown_words(self):
        vocabulary = build_vocab([["a", "a", "b", "c"]], max_size=len(SPECIAL_TOKENS) + 1)
        self.assertEqual(len(vocabulary), len(SPECIAL_TOKENS) + 1)
        self.assertEqual(list(vocabulary.encode(["a", "b"])), [vocabulary.id_of("a"), UNK_ID])
        self.assertAlmostEqual(vocabulary.coverage(["a", "a", "b", "c"]), 0.5)

    def test_min_freq(self):
        vocabulary = build_vocab([["a", "a", "b"]], max_size=10, min_freq=2)
        self.assertNotIn("b", vocabulary)

    def test_vocabulary_must_start_with_special_tokens(self):
        with self.assertRaises(Config_Exception):
            Vocabulary(["a", "b"])

    def test_empty_corpus(self):
        with self.assertRaises(Ingestion_Exception):
            build_vocab([[]], max_size=10)

    def test_dictionary_round_trip_keeps_hash(self):
        vocabulary = build_vocab([["x", "y"]], max_size=10).with_doc_id_region(3)
        self.assertEqual(Vocabulary.from_dict(vocabulary.to_dict()).vocab_hash(), vocabulary.vocab_hash())


class TestPacking(TestCase):

    def test_sentences_are_packed_whole_within_documents(self):
        documents = [[[4, 5, 6], [7, 8], [9, 10, 11]], [[12, 13]]]
        sequences = pack_sequences(documents, max_seq_len=5)
        self.assertEqual([list(s.token_ids) for s in sequences], [[4, 5, 6, 7, 8], [9, 10, 11], [12, 13]])
        self.assertEqual([s.document_index for s in sequences], [0, 0, 1])
        self.assertEqual(sequences[0].sentence_offsets, (0, 3))
        self.assertEqual(list(sequences[2].source_positions), [8, 9])

    def test_long_sentence_is_truncated_with_warning(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            sequences = pack_sequences([[[4, 5], list(range(4, 12)), [6]]], max_seq_len=4)
        self.assertTrue(any(isinstance(w.message, Truncated_Sentence_Warning) for w in caught))
        self.assertEqual([len(s) for s in sequences], [2, 4, 1])
        self.assertEqual([s.truncated for s in sequences], [False, True, False])

    def test_reserved_prefix_shrinks_budget(self):
        sequences = pack_sequences([[[4, 5], [6, 7]]], max_seq_len=5, reserved_prefix=DOC_ID_PREFIX_LENGTH)
        self.assertEqual([len(s) for s in sequences], [2, 2])

    def test_corpus_file_packing(self):
        text = read_corpus(load_test_resource("tiny_train.txt"))
        corpus = tokenize_corpus(text)
        vocabulary = build_vocab([[t for sentence in document for t in sentence] for document in corpus], max_size=256)
        dataset = build_dataset(corpus, vocabulary, max_seq_len=32)
        self.assertEqual(dataset.document_count, 6)
        self.assertTrue(all(len(sequence) <= 32 for sequence in dataset))
        self.assertEqual(dataset.token_count, len(dataset.token_stream))
        self.assertEqual(len(dataset.first_documents(0.5).sequences), len([s for s in dataset if s.document_index < 3]))

    def test_missing_and_empty_corpus(self):
        with tempfile.TemporaryDirectory() as directory:
            empty = Path(directory) / "empty.txt"
            empty.write_text("  \n\n", encoding="utf-8")
            with self.assertRaises(Ingestion_Exception):
                read_corpus(empty)
            with self.assertRaises(Ingestion_Exception):
                read_corpus(Path(directory) / "absent.txt")

    def test_manifest_lists_every_sequence(self):
        vocabulary = Vocabulary(SPECIAL_TOKENS + ("a", "b"))
        dataset = dataset_from_ids([[4, 5], [5, 4, 4]], vocabulary)
        manifest = dataset.manifest()
        self.assertEqual([entry["length"] for entry in manifest["sequences"]], [2, 3])
        self.assertEqual(manifest["vocab_hash"], vocabulary.vocab_hash())


class TestMasking(TestCase):

    def setUp(self):
        self.vocabulary = Vocabulary(SPECIAL_TOKENS + tuple(f"w{i}" for i in range(20)))
        self.dataset = dataset_from_ids([list(range(4, 24)) * 5, [0, 1, 4, 5, 3]], self.vocabulary, max_seq_len=128)

    def test_special_tokens_are_never_masked(self):
        sequence = self.dataset[1]
        self.assertEqual(list(maskable_positions(sequence, self.vocabulary)), [2, 3])
        masked = apply_mlm_mask(sequence, self.vocabulary, p=1.0)
        self.assertEqual(list(masked.mask_layout.positions), [2, 3])
        self.assertEqual(list(masked.input_ids()), [0, 1, MASK_ID, MASK_ID, 3])

    def test_layout_is_deterministic_per_seed_and_stream(self):
        first = apply_mlm_mask(self.dataset[0], self.vocabulary, seed=3, stream=2)
        second = apply_mlm_mask(self.dataset[0], self.vocabulary, seed=3, stream=2)
        other = apply_mlm_mask(self.dataset[0], self.vocabulary, seed=3, stream=5)
        self.assertTrue(np.array_equal(first.mask_layout.positions, second.mask_layout.positions))
        self.assertFalse(np.array_equal(first.mask_layout.positions, other.mask_layout.positions))

    def test_double_masking_is_rejected(self):
        masked = apply_mlm_mask(self.dataset[0], self.vocabulary)
        with self.assertRaises(Config_Exception):
            apply_mlm_mask(masked, self.vocabulary)

    def test_mask_dataset_replaces_layouts(self):
        masked = mask_dataset(self.dataset, self.vocabulary, seed=1)
        remasked = mask_dataset(masked, self.vocabulary, seed=1)
        self.assertTrue(np.array_equal(masked[0].mask_layout.positions, remasked[0].mask_layout.positions))

    def test_bert_corruption_codes(self):
        masked = apply_mlm_mask(self.dataset[0], self.vocabulary, p=1.0, corruption=MLM_Corruption.bert_80_10_10)
        layout = masked.mask_layout
        kept = layout.corruption == Mask_Corruption.keep.value
        self.assertTrue(np.array_equal(layout.replacement_ids[kept], layout.original_ids[kept]))
        self.assertTrue(np.all(layout.replacement_ids[layout.corruption == Mask_Corruption.mask.value] == MASK_ID))
        randoms = layout.replacement_ids[layout.corruption == Mask_Corruption.random.value]
        self.assertTrue(np.all((randoms >= len(SPECIAL_TOKENS)) & (randoms < len(self.vocabulary))))


class TestDocIds(TestCase):

    def setUp(self):
        self.vocabulary = Vocabulary(SPECIAL_TOKENS + ("a", "b", "c"))
        self.corpus = [[["a", "b"], ["c"]], [["b", "b", "a"]]]

    def test_control_is_unchanged(self):
        dataset = build_dataset(self.corpus, self.vocabulary, max_seq_len=8)
        unchanged, vocabulary = prepend_doc_ids(dataset, self.vocabulary, Doc_Id_Mode.control)
        self.assertIs(unchanged, dataset)
        self.assertIs(vocabulary, self.vocabulary)

    def test_vocab_only_grows_vocabulary_by_dataset_size(self):
        dataset = build_dataset(self.corpus, self.vocabulary, max_seq_len=8)
        extended, vocabulary = prepend_doc_ids(dataset, self.vocabulary, Doc_Id_Mode.vocab_only)
        self.assertEqual(len(vocabulary), len(self.vocabulary) + len(dataset))
        self.assertTrue(np.array_equal(extended[0].token_ids, dataset[0].token_ids))

    def test_prepend_adds_unique_prefix(self):
        dataset = build_dataset(self.corpus, self.vocabulary, max_seq_len=8, reserved_prefix=DOC_ID_PREFIX_LENGTH)
        prefixed, vocabulary = prepend_doc_ids(dataset, self.vocabulary, Doc_Id_Mode.prepend)
        self.assertEqual(prefixed[0].prefix_length, DOC_ID_PREFIX_LENGTH)
        self.assertEqual(vocabulary.decode(prefixed[0].token_ids[:2]), ["document", "ID"])
        self.assertTrue(vocabulary.is_doc_id(int(prefixed[0].token_ids[2])))
        self.assertNotEqual(prefixed[0].token_ids[2], prefixed[1].token_ids[2])
        self.assertTrue(np.array_equal(prefixed[1].content_ids, dataset[1].token_ids))
        self.assertEqual(prefixed[0].content_hash(), dataset[0].content_hash())

    def test_prefix_positions_are_not_maskable(self):
        dataset = build_dataset(self.corpus, self.vocabulary, max_seq_len=8, reserved_prefix=DOC_ID_PREFIX_LENGTH)
        prefixed, vocabulary = prepend_doc_ids(dataset, self.vocabulary, Doc_Id_Mode.prepend)
        self.assertTrue(np.all(maskable_positions(prefixed[0], vocabulary) >= DOC_ID_PREFIX_LENGTH))

    def test_prepend_overflow(self):
        dataset = build_dataset([[["a", "b", "c", "a"]]], self.vocabulary, max_seq_len=5)
        with self.assertRaises(Doc_Id_Overflow_Exception):
            prepend_doc_ids(dataset, self.vocabulary, Doc_Id_Mode.prepend)

    def test_existing_region_is_rejected(self):
        dataset = build_dataset(self.corpus, self.vocabulary, max_seq_len=8)
        _dataset, vocabulary = prepend_doc_ids(dataset, self.vocabulary, Doc_Id_Mode.vocab_only)
        with self.assertRaises(Doc_Id_Region_Exception):
            prepend_doc_ids(dataset, vocabulary, Doc_Id_Mode.vocab_only)
