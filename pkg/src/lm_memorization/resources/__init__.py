"""Packaged data files: model presets and the seed part-of-speech lexicon."""
