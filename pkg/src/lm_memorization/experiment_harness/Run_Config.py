"""Module containing the Run_Config class: every setting that determines a training run, with a canonical serialization whose hash identifies the run."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from lm_memorization.corpus_pipeline.doc_ids import Doc_Id_Mode
from lm_memorization.corpus_pipeline.mlm_masking import DEFAULT_MASK_PROBABILITY, MLM_Corruption
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.transformer_lm.Transformer_Config import DEFAULT_MAX_SEQ_LEN, DEFAULT_VOCAB_SIZE, LM_Task, Transformer_Config, is_paper_preset, preset_config

LOG_ROOT_ENV = "LM_MEMORIZATION_LOG_ROOT"
DEFAULT_LOG_ROOT = "runs"
DEFAULT_TAUS: tuple[float, ...] = (0.4, 0.6, 0.8, 0.9)
DEFAULT_INJECTION_FRACTION = 0.2
_IDENTITY_EXCLUDED = frozenset({"run_id", "log_root", "record_wall_time"})


class Experiment_Kind(Enum):
    """The experiment a run configuration belongs to."""

    train = "train"
    scale_sweep = "scale-sweep"
    lr_sweep = "lr-sweep"
    data_sweep = "data-sweep"
    docid = "docid"
    forgetting = "forgetting"
    repetition = "repetition"
    order_invariance = "order-invariance"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Run_Config:
    """Configuration of one training run.

    Exactly one of max_epochs and max_updates is set. Either a preset name or an explicit model architecture (n_layers, n_heads, d_model) is given; the vocabulary size of the model comes from the built vocabulary.

    Attributes:
        run_id (str | None): Name of the run directory. Defaults to the experiment kind and the configuration hash.
        experiment (Experiment_Kind): The experiment the run belongs to.
        preset (str | None): A desk or large-scale preset name.
        model (dict[str, int] | None): Explicit n_layers, n_heads and d_model when no preset is used.
        task (LM_Task): Causal or masked language modeling.
        tie_embeddings (bool): Whether the output projection reuses the token embeddings.
        train_path (str | None): Training corpus.
        valid_path (str | None): Validation corpus; also the special batch of forgetting runs.
        annotation_path (str | None): Part-of-speech annotations aligned with the training token stream.
        seed (int): Seed of initialization, data order and training masks.
        max_epochs (int | None): Epoch budget.
        max_updates (int | None): Update budget.
        batch_tokens (int): Tokens per update.
        learning_rate (float | None): Maximum learning rate. Defaults to the preset's or the size-interpolated value.
        eval_every (int): Epochs between full memorization evaluations.
        checkpoint_every (int): Epochs between checkpoints.
        taus (tuple[float, ...]): Memorization thresholds reported for the run.
        docid_mode (Doc_Id_Mode): Unique identifier arm.
        reserve_doc_id_prefix (bool): Pack with room for a docid prefix even in the control arm.
        inject_epoch (int | None): Epoch after which the special batch is injected.
        repetitions (int): Passes over the special batch per injection.
        spacing_period (int | None): Epochs between repeated injections of the spaced arm.
        vocab_size (int): Maximum vocabulary size before docid identifiers.
        min_freq (int): Minimum count of a vocabulary word.
        max_seq_len (int): Maximum packed sequence length.
        mask_probability (float): Masked-language-model mask probability.
        mlm_corruption (MLM_Corruption): Replacement rule of masked positions.
        eval_mask_seed (int): Seed of the frozen evaluation mask layout.
        eval_batch_size (int): Maximum sequences per evaluation forward pass.
        track_pos (bool): Record part-of-speech ratios each evaluation.
        track_memory_units (bool): Record memory unit lengths each evaluation (causal task).
        data_fraction (float): Fraction of training documents used.
        allow_paper_scale (bool): Allow training a large-scale preset.
        reset_schedule_on_injection (bool): Restart the learning-rate schedule at injection instead of continuing it.
        interleave_repetitions (bool): Shuffle repeated special-batch passes together instead of running them back to back.
        strict_thresholds (bool): Fail when a threshold is not reached instead of warning.
        record_wall_time (bool): Write wall-clock timestamps into the metric log.
        dtype (str): Parameter precision, float32 or float64.
        log_root (str | None): Root of the run directories. Defaults to the environment variable or ./runs.
    """

    run_id: str | None = None
    experiment: Experiment_Kind = Experiment_Kind.train
    preset: str | None = "desk-tiny"
    model: dict[str, int] | None = None
    task: LM_Task = LM_Task.causal
    tie_embeddings: bool = True
    train_path: str | None = None
    valid_path: str | None = None
    annotation_path: str | None = None
    seed: int = 0
    max_epochs: int | None = None
    max_updates: int | None = None
    batch_tokens: int = 16384
    learning_rate: float | None = None
    eval_every: int = 1
    checkpoint_every: int = 1
    taus: tuple[float, ...] = DEFAULT_TAUS
    docid_mode: Doc_Id_Mode = Doc_Id_Mode.control
    reserve_doc_id_prefix: bool = False
    inject_epoch: int | None = None
    repetitions: int = 1
    spacing_period: int | None = None
    vocab_size: int = DEFAULT_VOCAB_SIZE
    min_freq: int = 1
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    mask_probability: float = DEFAULT_MASK_PROBABILITY
    mlm_corruption: MLM_Corruption = MLM_Corruption.mask_only
    eval_mask_seed: int = 1234
    eval_batch_size: int = 8
    track_pos: bool = False
    track_memory_units: bool = True
    data_fraction: float = 1.0
    allow_paper_scale: bool = False
    reset_schedule_on_injection: bool = False
    interleave_repetitions: bool = False
    strict_thresholds: bool = False
    record_wall_time: bool = False
    dtype: str = "float32"
    log_root: str | None = field(default=None)

    def __post_init__(self) -> None:
        for name, enum_type in (("experiment", Experiment_Kind), ("task", LM_Task), ("docid_mode", Doc_Id_Mode), ("mlm_corruption", MLM_Corruption)):
            value = getattr(self, name)
            if not isinstance(value, enum_type):
                try:
                    object.__setattr__(self, name, enum_type(value))
                except ValueError as error:
                    raise Config_Exception(f"Invalid {name} {value!r}") from error
        object.__setattr__(self, "taus", tuple(float(tau) for tau in self.taus))
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            Config_Exception: If any field violates the run constraints.
        """
        if (self.max_epochs is None) == (self.max_updates is None):
            raise Config_Exception("Exactly one of max_epochs and max_updates must be set")
        for name in ("max_epochs", "max_updates"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise Config_Exception(f"{name} must be positive but got {value}")
        if (self.preset is None) == (self.model is None):
            raise Config_Exception("Exactly one of preset and model must be given")
        if self.model is not None and set(self.model) != {"n_layers", "n_heads", "d_model"}:
            raise Config_Exception(f"Explicit model needs exactly n_layers, n_heads and d_model but got {sorted(self.model)}")
        if self.preset is not None and is_paper_preset(self.preset) and not self.allow_paper_scale:
            raise Config_Exception(f"Preset {self.preset} is large scale; set allow_paper_scale to train it")
        if any(not 0.0 < tau < 1.0 for tau in self.taus):
            raise Config_Exception(f"Thresholds must lie in (0, 1) but got {self.taus}")
        if self.seed < 0 or self.eval_mask_seed < 0:
            raise Config_Exception("Seeds must be non-negative")
        for name in ("batch_tokens", "eval_every", "checkpoint_every", "repetitions", "min_freq", "eval_batch_size"):
            if getattr(self, name) < 1:
                raise Config_Exception(f"{name} must be at least 1 but got {getattr(self, name)}")
        if self.max_seq_len < 2:
            raise Config_Exception(f"max_seq_len must be at least 2 but got {self.max_seq_len}")
        if not 0.0 < self.data_fraction <= 1.0:
            raise Config_Exception(f"data_fraction must lie in (0, 1] but got {self.data_fraction}")
        if not 0.0 <= self.mask_probability <= 1.0:
            raise Config_Exception(f"mask_probability must lie in [0, 1] but got {self.mask_probability}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise Config_Exception(f"learning_rate must be positive but got {self.learning_rate}")
        if self.dtype not in ("float32", "float64"):
            raise Config_Exception(f"dtype must be float32 or float64 but got {self.dtype}")
        if self.inject_epoch is not None:
            if self.max_epochs is None:
                raise Config_Exception("Injection needs an epoch budget")
            if not 1 <= self.inject_epoch < self.max_epochs:
                raise Config_Exception(f"inject_epoch must lie in [1, {self.max_epochs}) but got {self.inject_epoch}")
        if self.spacing_period is not None and self.spacing_period < 1:
            raise Config_Exception(f"spacing_period must be at least 1 but got {self.spacing_period}")

    def to_dict(self) -> dict[str, Any]:
        """
        Returns:
            dict[str, Any]: JSON-serializable field values.
        """
        values = asdict(self)
        for name, value in values.items():
            if isinstance(value, Enum):
                values[name] = value.value
        values["taus"] = list(self.taus)
        return values

    def canonical_json(self) -> str:
        """
        Returns:
            str: The configuration as JSON with sorted keys and compact separators.
        """
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        """
        Returns:
            str: sha256 of the canonical JSON of every field that influences the run's results.
        """
        identity = {k: v for k, v in self.to_dict().items() if k not in _IDENTITY_EXCLUDED}
        return hashlib.sha256(json.dumps(identity, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()

    @property
    def resolved_run_id(self) -> str:
        return self.run_id if self.run_id is not None else f"{self.experiment}-{self.config_hash[:12]}"

    @property
    def log_root_path(self) -> Path:
        """
        Returns:
            Path: The configured log root, else the LM_MEMORIZATION_LOG_ROOT environment variable, else ./runs.
        """
        return Path(self.log_root if self.log_root is not None else os.environ.get(LOG_ROOT_ENV, DEFAULT_LOG_ROOT))

    @property
    def run_dir(self) -> Path:
        return self.log_root_path / self.resolved_run_id

    @property
    def resolved_inject_epoch(self) -> int:
        """
        Returns:
            int: The injection epoch, defaulting to 20% of the epoch budget.
        """
        if self.inject_epoch is not None:
            return self.inject_epoch
        if self.max_epochs is None or self.max_epochs < 2:
            raise Config_Exception("Injection needs an epoch budget of at least 2")
        return min(self.max_epochs - 1, max(1, round(DEFAULT_INJECTION_FRACTION * self.max_epochs)))

    def model_config(self, vocab_size: int) -> Transformer_Config:
        """
        Args:
            vocab_size (int): Size of the built vocabulary.

        Returns:
            Transformer_Config: The architecture of the run's model.
        """
        if self.preset is not None:
            return preset_config(self.preset, vocab_size=vocab_size, max_seq_len=self.max_seq_len, task=self.task, tie_embeddings=self.tie_embeddings)
        assert self.model is not None
        return Transformer_Config(vocab_size=vocab_size, max_seq_len=self.max_seq_len, task=self.task, tie_embeddings=self.tie_embeddings, **self.model)

    def with_changes(self, **changes: Any) -> Run_Config:
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> Run_Config:
        """
        Args:
            values (dict[str, Any]): Field values as produced by to_dict; missing fields take their defaults.

        Returns:
            Run_Config: The validated configuration.

        Raises:
            Config_Exception: If unknown fields are present.
        """
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise Config_Exception(f"Unknown run configuration fields: {sorted(unknown)}")
        values = dict(values)
        if "taus" in values:
            values["taus"] = tuple(values["taus"])
        return cls(**values)

    @classmethod
    def from_json_file(cls, path: str | Path) -> Run_Config:
        """
        Args:
            path (str | Path): A JSON file of run configuration fields.

        Returns:
            Run_Config: The validated configuration.
        """
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as error:
            raise Config_Exception(f"Cannot read configuration {path}: {error}") from error
        if not isinstance(values, dict):
            raise Config_Exception(f"Configuration {path} must hold a JSON object")
        return cls.from_dict(values)

    def write_resolved(self, directory: str | Path) -> Path:
        """
        Args:
            directory (str | Path): The run directory.

        Returns:
            Path: The written config.resolved.json, holding the canonical JSON with the resolved run id.
        """
        path = Path(directory) / "config.resolved.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.with_changes(run_id=self.resolved_run_id).canonical_json() + "\n", encoding="utf-8")
        return path
