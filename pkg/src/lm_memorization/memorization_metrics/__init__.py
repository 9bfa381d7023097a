"""Quantitative memorization instruments: exact memorization over context sets, per-update memorization, threshold crossings, perplexity, overfit detection, part-of-speech ratios and memory unit lengths."""
