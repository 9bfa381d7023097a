"""Text ingestion, word-level tokenization, sentence-respecting packing, masked-language-model corruption, document identifiers and part-of-speech annotations."""
