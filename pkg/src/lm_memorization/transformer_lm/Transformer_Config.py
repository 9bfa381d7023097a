"""Module containing the Transformer_Config class, the language modeling task enumeration and the model presets.

Presets are stored in the packaged presets.json resource: a desk-scale grid spanning about two orders of magnitude in parameter count, and the large-scale grid kept for configuration bookkeeping.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from typing import Any

import importlib_resources

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception

DEFAULT_MAX_SEQ_LEN = 512
DEFAULT_VOCAB_SIZE = 8192
FFN_MULTIPLIER = 4


class LM_Task(Enum):
    """Enumeration of the language modeling objectives."""

    causal = "causal"  # Autoregressive next-token prediction with strictly lower-triangular attention.
    masked = "masked"  # Masked-token prediction with bidirectional attention.

    def __str__(self) -> str:
        return self.value


@dataclass
class Transformer_Config:
    """Architecture hyperparameters of a decoder-style transformer language model.

    The parameter count N is derived from the other fields in closed form. It is cached and the cache is dropped whenever any field is assigned.

    Attributes:
        n_layers (int): Number of transformer blocks (#L).
        n_heads (int): Number of attention heads (#H).
        d_model (int): Embedding width.
        vocab_size (int): Vocabulary size V.
        max_seq_len (int): Maximum sequence length in tokens.
        task (LM_Task): The training objective.
        tie_embeddings (bool): If True, the output projection reuses the token embedding matrix.
        positional_embeddings (bool): If True, learned absolute positional embeddings are added to the token embeddings.
        preset (str | None): The preset this configuration was built from, if any.
    """

    n_layers: int
    n_heads: int
    d_model: int
    vocab_size: int = DEFAULT_VOCAB_SIZE
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    task: LM_Task = LM_Task.causal
    tie_embeddings: bool = True
    positional_embeddings: bool = True
    preset: str | None = None

    def __post_init__(self) -> None:
        if isinstance(self.task, str):
            self.task = LM_Task(self.task)
        self.validate()

    def __setattr__(self, name: str, value: Any) -> None:
        super().__setattr__(name, value)
        if name != "_param_count_cache":
            super().__setattr__("_param_count_cache", None)

    def validate(self) -> None:
        """
        Raises:
            Config_Exception: If the heads do not divide the model width, the sequence length is below 2, or any extent is not positive.
        """
        if self.n_layers < 0:
            raise Config_Exception(f"n_layers must be non-negative but got {self.n_layers}")
        if self.n_heads < 1 or self.d_model < 2 or self.vocab_size < 1:
            raise Config_Exception(f"n_heads, d_model and vocab_size must be positive but got {self.n_heads}, {self.d_model}, {self.vocab_size}")
        if self.d_model % self.n_heads != 0:
            raise Config_Exception(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if self.max_seq_len < 2:
            raise Config_Exception(f"max_seq_len must be at least 2 but got {self.max_seq_len}")

    @property
    def d_ffn(self) -> int:
        """
        Returns:
            int: The width of the feed-forward hidden layer, four times d_model.
        """
        return FFN_MULTIPLIER * self.d_model

    @property
    def head_width(self) -> int:
        """
        Returns:
            int: The width of each attention head.
        """
        return self.d_model // self.n_heads

    @property
    def has_final_layer_norm(self) -> bool:
        """
        Returns:
            bool: True if a final layer norm follows the blocks. A model without blocks is a pure embedding model and has none.
        """
        return self.n_layers > 0

    @property
    def param_count(self) -> int:
        """
        Returns:
            int: The exact number of scalar learnable parameters N.
        """
        cached = getattr(self, "_param_count_cache", None)
        if cached is None:
            cached = param_count(self)
            super().__setattr__("_param_count_cache", cached)
        return int(cached)

    def with_changes(self, **changes: Any) -> Transformer_Config:
        """
        Args:
            **changes (Any): Field values to replace.

        Returns:
            Transformer_Config: A validated copy of this configuration with the given fields replaced.
        """
        values = self.to_dict()
        values.update({k: (v.value if isinstance(v, LM_Task) else v) for k, v in changes.items()})
        return Transformer_Config.from_dict(values)

    def to_dict(self) -> dict[str, Any]:
        """
        Returns:
            dict[str, Any]: JSON-serializable field values.
        """
        values = {k: v for k, v in asdict(self).items() if not k.startswith("_")}
        values["task"] = self.task.value
        return values

    def canonical_json(self) -> str:
        """
        Returns:
            str: The configuration as JSON with sorted keys and compact separators.
        """
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> Transformer_Config:
        """
        Args:
            values (dict[str, Any]): Field values as produced by to_dict.

        Returns:
            Transformer_Config: The validated configuration.
        """
        known = {"n_layers", "n_heads", "d_model", "vocab_size", "max_seq_len", "task", "tie_embeddings", "positional_embeddings", "preset"}
        unknown = set(values) - known
        if unknown:
            raise Config_Exception(f"Unknown model configuration fields: {sorted(unknown)}")
        return cls(**values)


def param_count(config: Transformer_Config) -> int:
    """Closed-form count of scalar learnable parameters.

    Each block holds two layer norms (2 x 2d), query/key/value/output projections with biases (4d^2 + 4d) and a feed-forward pair with biases (8d^2 + 5d), i.e. 12d^2 + 13d.

    Args:
        config (Transformer_Config): The architecture.

    Returns:
        int: The parameter count N.
    """
    d = config.d_model
    total = config.vocab_size * d
    if config.positional_embeddings:
        total += config.max_seq_len * d
    total += config.n_layers * (12 * d * d + 13 * d)
    if config.has_final_layer_norm:
        total += 2 * d
    if not config.tie_embeddings:
        total += d * config.vocab_size
    return total


@lru_cache(maxsize=1)
def load_presets() -> dict[str, dict[str, dict[str, Any]]]:
    """
    Returns:
        dict[str, dict[str, dict[str, Any]]]: The packaged presets grouped into the "desk" and large-scale "paper" grids.
    """
    source = importlib_resources.files("lm_memorization.resources").joinpath("presets.json")
    with source.open("r", encoding="utf-8") as preset_file:
        presets: dict[str, dict[str, dict[str, Any]]] = json.load(preset_file)
    return presets


def desk_grid() -> list[str]:
    """
    Returns:
        list[str]: Desk preset names ordered from smallest to largest.
    """
    return list(load_presets()["desk"])


def paper_grid() -> list[str]:
    """
    Returns:
        list[str]: Large-scale preset names ordered from smallest to largest.
    """
    return list(load_presets()["paper"])


def is_paper_preset(name: str) -> bool:
    """
    Args:
        name (str): A preset name.

    Returns:
        bool: True if the preset belongs to the large-scale grid.
    """
    return name in load_presets()["paper"]


def _preset_entry(name: str) -> dict[str, Any]:
    presets = load_presets()
    for grid in presets.values():
        if name in grid:
            return grid[name]
    raise Config_Exception(f"Unknown preset {name!r}; expected one of {desk_grid() + paper_grid()}")


def preset_config(name: str, vocab_size: int = DEFAULT_VOCAB_SIZE, max_seq_len: int = DEFAULT_MAX_SEQ_LEN, task: LM_Task = LM_Task.causal, tie_embeddings: bool = True) -> Transformer_Config:
    """
    Args:
        name (str): A desk or large-scale preset name.
        vocab_size (int, optional): Vocabulary size. Defaults to 8192.
        max_seq_len (int, optional): Maximum sequence length. Defaults to 512.
        task (LM_Task, optional): Training objective. Defaults to causal.
        tie_embeddings (bool, optional): Whether to tie input and output embeddings. Defaults to True.

    Returns:
        Transformer_Config: The preset architecture.
    """
    entry = _preset_entry(name)
    return Transformer_Config(
        n_layers=entry["n_layers"], n_heads=entry["n_heads"], d_model=entry["d_model"], vocab_size=vocab_size, max_seq_len=max_seq_len, task=task, tie_embeddings=tie_embeddings, preset=name
    )


def preset_learning_rate(name: str) -> float | None:
    """
    Args:
        name (str): A preset name.

    Returns:
        float | None: The maximum learning rate listed for a large-scale preset, None for desk presets.
    """
    value = _preset_entry(name).get("learning_rate")
    return None if value is None else float(value)


def default_max_lr(n_params: int) -> float:
    """Maximum learning rate by geometric interpolation of the large-scale learning rates over model size.

    Between two large-scale presets the learning rate is interpolated linearly in log(lr) against log(N). Sizes outside the large-scale range take the nearest endpoint value.

    Args:
        n_params (int): The model's parameter count N.

    Returns:
        float: The default maximum learning rate.
    """
    points = sorted((float(entry["nominal_size"]), float(entry["learning_rate"])) for entry in load_presets()["paper"].values())
    if n_params <= points[0][0]:
        return points[0][1]
    if n_params >= points[-1][0]:
        return points[-1][1]
    for (n_low, lr_low), (n_high, lr_high) in zip(points, points[1:], strict=False):
        if n_low <= n_params <= n_high:
            weight = (math.log(n_params) - math.log(n_low)) / (math.log(n_high) - math.log(n_low))
            return math.exp((1.0 - weight) * math.log(lr_low) + weight * math.log(lr_high))
    return points[-1][1]
