"""Unit tests of the lm_memorization package."""
