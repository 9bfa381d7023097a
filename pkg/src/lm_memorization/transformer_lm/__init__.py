"""Decoder-style transformer language model supporting causal and masked objectives, its configuration presets and checkpoint files."""
