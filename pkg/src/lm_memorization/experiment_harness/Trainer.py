"""Module containing the Trainer class: the resumable epoch loop of one run, and run_training built on it."""

from __future__ import annotations

import time
import warnings
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from itertools import count
from pathlib import Path
from typing import Any

import numpy as np

from lm_memorization.corpus_pipeline.mlm_masking import apply_mlm_mask
from lm_memorization.corpus_pipeline.Packed_Dataset import Packed_Dataset
from lm_memorization.corpus_pipeline.Packed_Sequence import Packed_Sequence
from lm_memorization.corpus_pipeline.Vocabulary import PAD_ID
from lm_memorization.experiment_harness.experiment_data import Experiment_Data, prepare_experiment_data
from lm_memorization.experiment_harness.figure_data import write_run_figures
from lm_memorization.experiment_harness.metric_log import (
    INJECTION_KIND,
    METRICS_FILE,
    UPDATE_KIND,
    Metric_Log,
    epoch_record_to_log,
    history_from_records,
    is_complete,
    make_record,
    read_records,
)
from lm_memorization.experiment_harness.Run_Config import Run_Config
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Numeric_Exception
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Setup_Exception, Unreached_Threshold_Exception
from lm_memorization.lm_memorization_logging.memorization_logger import Memorization_Warning_Log, Training_Log
from lm_memorization.lm_memorization_warnings.LM_Memorization_Warning import Empty_Batch_Warning, LM_Memorization_Warning, Paper_Scale_Override_Warning, Unreached_Threshold_Warning
from lm_memorization.memorization_metrics.Context_Set import Context_Set, extract_contexts
from lm_memorization.memorization_metrics.evaluation import evaluate_contexts, update_memorization
from lm_memorization.memorization_metrics.Memorization_History import Crossing_Kind, Epoch_Record, Memorization_History, Update_Record
from lm_memorization.memorization_metrics.memory_units import correctness_bitmaps, memory_unit_lengths
from lm_memorization.memorization_metrics.pos_metrics import pos_ratios
from lm_memorization.memorization_metrics.thresholds import Threshold_Crossing, run_crossing
from lm_memorization.optimizer_schedule.Adam_State import Adam_State, adam_step
from lm_memorization.optimizer_schedule.Lr_Schedule import Lr_Schedule
from lm_memorization.tensor_core.Grad_Tape import Grad_Tape
from lm_memorization.tensor_core.operations import cross_entropy
from lm_memorization.transformer_lm.checkpoint import Training_Counters, load_checkpoint, save_checkpoint
from lm_memorization.transformer_lm.Model_State import Model_State, build_model, forward
from lm_memorization.transformer_lm.Transformer_Config import LM_Task, default_max_lr, is_paper_preset, preset_learning_rate

CHECKPOINT_DIR = "checkpoints"
SPECIAL_STREAM_BASE = 1_000_000


@dataclass(frozen=True)
class Injection_Plan:
    """When and how the special batch is trained on.

    Attributes:
        epochs (tuple[int, ...]): Epochs after which the special batch is injected, in increasing order.
        repetitions (int): Passes over the special batch per injection.
        interleave (bool): Shuffle the repeated passes together instead of running them back to back.
        reset_schedule (bool): Restart the learning-rate schedule at each injection.
    """

    epochs: tuple[int, ...]
    repetitions: int = 1
    interleave: bool = False
    reset_schedule: bool = False

    @classmethod
    def from_config(cls, config: Run_Config) -> Injection_Plan:
        """
        Args:
            config (Run_Config): A forgetting-run configuration.

        Returns:
            Injection_Plan: One injection at the configured epoch, or one every spacing_period epochs from it when spaced.
        """
        first = config.resolved_inject_epoch
        assert config.max_epochs is not None
        epochs = (first,) if config.spacing_period is None else tuple(range(first, config.max_epochs, config.spacing_period))
        return cls(epochs, config.repetitions, config.interleave_repetitions, config.reset_schedule_on_injection)


def greedy_batches(order: Sequence[int], lengths: Sequence[int], batch_tokens: int) -> list[list[int]]:
    """
    Args:
        order (Sequence[int]): Sequence indices in visiting order.
        lengths (Sequence[int]): Length of every sequence.
        batch_tokens (int): Token budget per batch.

    Returns:
        list[list[int]]: Consecutive runs of the order whose lengths fit the budget; every batch holds at least one sequence.
    """
    batches: list[list[int]] = []
    current: list[int] = []
    used = 0
    for index in order:
        length = lengths[index]
        if current and used + length > batch_tokens:
            batches.append(current)
            current, used = [], 0
        current.append(int(index))
        used += length
    if current:
        batches.append(current)
    return batches


def resolve_max_lr(config: Run_Config, param_count: int) -> float:
    """
    Args:
        config (Run_Config): The run configuration.
        param_count (int): The model size N.

    Returns:
        float: The configured learning rate, else the preset's, else the value interpolated by model size.
    """
    if config.learning_rate is not None:
        return config.learning_rate
    preset_lr = None if config.preset is None else preset_learning_rate(config.preset)
    return preset_lr if preset_lr is not None else default_max_lr(param_count)


@contextmanager
def routed_warnings(warning_log: Memorization_Warning_Log | None, source: str) -> Iterator[None]:
    """Route laboratory warnings raised inside the block to a warning log.

    Args:
        warning_log (Memorization_Warning_Log | None): The log; when None, warnings propagate normally.
        source (str): The source reported with each warning.
    """
    if warning_log is None:
        yield
        return
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", LM_Memorization_Warning)
        yield
    for message in caught:
        if isinstance(message.message, LM_Memorization_Warning):
            warning_log.warn(message.message, source)
        else:
            warnings.warn_explicit(message.message, message.category, message.filename, message.lineno)


class Trainer:
    """The training loop of one run.

    Epoch e visits the training sequences in an order drawn from (seed, e) and, for the masked task, draws training masks from the same pair.
    Every quantity the loop depends on is either in a checkpoint or derived from the configuration, so a run resumed from a checkpoint rewrites its metric log byte for byte.

    Attributes:
        config (Run_Config): The run configuration.
        data (Experiment_Data): The prepared datasets.
        run_id (str): The run id.
        run_dir (Path): The run directory.
        history (Memorization_History): Measurements so far.
    """

    def __init__(
        self,
        config: Run_Config,
        data: Experiment_Data,
        special: Packed_Dataset | None = None,
        injection: Injection_Plan | None = None,
        training_log: Training_Log | None = None,
    ) -> None:
        """Initialize the Trainer.

        Args:
            config (Run_Config): The run configuration.
            data (Experiment_Data): The prepared datasets.
            special (Packed_Dataset, optional): The special batch of a forgetting run. Defaults to none.
            injection (Injection_Plan, optional): When to inject the special batch. Defaults to never.
            training_log (Training_Log, optional): Human-readable progress log. Defaults to no progress output.
        """
        self.config: Run_Config = config
        self.data: Experiment_Data = data
        self.run_id: str = config.resolved_run_id
        self.run_dir: Path = config.run_dir
        self._special: Packed_Dataset | None = special
        self._injection: Injection_Plan | None = injection
        self._training_log: Training_Log | None = training_log
        self.model_config = config.model_config(len(data.vocabulary))
        self.param_count: int = self.model_config.param_count
        self.max_lr: float = resolve_max_lr(config, self.param_count)
        self._lengths: list[int] = [len(sequence) for sequence in data.train]
        self._train_contexts: Context_Set = self._contexts(data.train)
        self._valid_contexts: Context_Set | None = None if data.valid is None else self._contexts(data.valid)
        self._special_contexts: Context_Set | None = None if special is None else self._contexts(special)
        self.total_tokens: int = self._planned_tokens()
        self.history: Memorization_History = Memorization_History(self.run_id, self.param_count, config.config_hash, epoch_budget=config.max_epochs, update_budget=config.max_updates)
        self.metric_log: Metric_Log = Metric_Log(self.run_dir / METRICS_FILE)
        self.model: Model_State = build_model(self.model_config, config.seed, dtype=config.dtype)
        self.optimizer: Adam_State = Adam_State.for_parameters(self.model.parameters)
        self.counters: Training_Counters = Training_Counters()
        self.schedule: Lr_Schedule = self._schedule(0.0)
        self._pending_injection: bool = False

    def _contexts(self, dataset: Packed_Dataset) -> Context_Set:
        config = self.config
        return extract_contexts(dataset, config.task, config.eval_mask_seed, config.mask_probability, config.mlm_corruption)

    @property
    def schedule_tokens(self) -> int:
        """
        Returns:
            int: Position of the learning-rate schedule: tokens of ordinary training batches so far. Special-batch passes train at the current rate without advancing it.
        """
        return self.counters.tokens_processed - self.counters.special_tokens

    def _schedule(self, offset_tokens: float) -> Lr_Schedule:
        if offset_tokens <= 0:
            return Lr_Schedule.for_run(self.max_lr, self.total_tokens)
        return Lr_Schedule.for_run(self.max_lr, self.total_tokens).restarted(offset_tokens, max(2.0, self.total_tokens - offset_tokens))

    def _planned_tokens(self) -> int:
        """Tokens the schedule spans: every planned training batch. A forgetting arm therefore plans the same schedule as the base run it branches from."""
        config = self.config
        if config.max_epochs is not None:
            return max(2, config.max_epochs * sum(self._lengths))
        assert config.max_updates is not None
        tokens, updates = 0, 0
        for epoch in count(1):
            for batch in self.epoch_batches(epoch):
                if updates == config.max_updates:
                    return max(2, tokens)
                tokens += sum(self._lengths[i] for i in batch)
                updates += 1
            if updates == config.max_updates:
                return max(2, tokens)
        return max(2, tokens)

    def epoch_batches(self, epoch: int) -> list[list[int]]:
        """
        Args:
            epoch (int): The 1-based epoch.

        Returns:
            list[list[int]]: Training sequence indices per batch, in visiting order.
        """
        order = np.random.default_rng([self.config.seed, epoch]).permutation(len(self._lengths))
        return greedy_batches(order.tolist(), self._lengths, self.config.batch_tokens)

    def _wall_time(self) -> float | None:
        return time.time() if self.config.record_wall_time else None

    def _batch_arrays(self, sequences: Sequence[Packed_Sequence], stream: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Padded inputs, targets, ignored positions, context positions and key mask of a batch, all indexed by logit position."""
        config = self.config
        width = max(len(sequence) for sequence in sequences)
        shape = (len(sequences), width)
        ids = np.full(shape, PAD_ID, dtype=np.int64)
        targets = np.zeros(shape, dtype=np.int64)
        ignored = np.ones(shape, dtype=bool)
        scored = np.zeros(shape, dtype=bool)
        key_mask = np.zeros(shape, dtype=bool)
        for row, sequence in enumerate(sequences):
            length = len(sequence)
            key_mask[row, :length] = True
            if config.task is LM_Task.causal:
                ids[row, :length] = sequence.token_ids
                targets[row, : length - 1] = sequence.token_ids[1:]
                ignored[row, : length - 1] = False
                scored[row, max(1, sequence.prefix_length) - 1 : length - 1] = True
            else:
                masked = apply_mlm_mask(sequence.with_mask_layout(None), self.data.vocabulary, config.mask_probability, config.seed, stream, config.mlm_corruption)
                assert masked.mask_layout is not None
                ids[row, :length] = masked.input_ids()
                positions = masked.mask_layout.positions
                targets[row, positions] = masked.mask_layout.original_ids
                ignored[row, positions] = False
                scored[row, positions] = True
        return ids, targets, ignored, scored, key_mask

    def train_batch(self, sequences: Sequence[Packed_Sequence], epoch: int, batch_id: int, stream: int, phase: str = "train") -> float | None:
        """Run one optimizer update on a batch.

        Args:
            sequences (Sequence[Packed_Sequence]): The batch.
            epoch (int): The epoch the update belongs to.
            batch_id (int): Index of the batch within its epoch.
            stream (int): Mask stream for the masked task.
            phase (str, optional): "train" or "inject". Defaults to "train".

        Returns:
            float | None: M_update of the batch, or None if the batch had nothing to score and was skipped.
        """
        ids, targets, ignored, scored, key_mask = self._batch_arrays(sequences, stream)
        if ignored.all():
            warnings.warn(Empty_Batch_Warning(epoch, batch_id), stacklevel=2)
            return None
        self.model.zero_grad()
        with Grad_Tape() as tape:
            logits = forward(self.model, ids, key_mask=key_mask)
            loss = cross_entropy(logits, targets, ignore_mask=ignored)
        tape.backward(loss)
        memorization = update_memorization(logits.data, targets, scored) if scored.any() else None
        batch_tokens = sum(len(sequence) for sequence in sequences)
        self.counters.tokens_processed += batch_tokens
        if phase == "inject":
            self.counters.special_tokens += batch_tokens
        learning_rate = self.schedule.lr_at(self.schedule_tokens)
        adam_step(self.model.parameters, self.optimizer, learning_rate)
        self.counters.update += 1
        if memorization is not None:
            self.history.add_update(Update_Record(self.counters.update, memorization, batch_id, epoch, self.counters.tokens_processed))
            self.metric_log.append(
                make_record(self.run_id, UPDATE_KIND, self.counters.update, self.counters.tokens_processed, self._wall_time(), M=memorization, epoch=epoch, batch=batch_id, phase=phase, lr=learning_rate)
            )
        return memorization

    def _special_metrics(self) -> tuple[float, float]:
        assert self._special_contexts is not None
        result = evaluate_contexts(self.model, self._special_contexts, self.config.eval_batch_size)
        return result.memorization, result.perplexity

    def evaluate(self, epoch: int) -> Epoch_Record:
        """
        Args:
            epoch (int): The epoch being closed.

        Returns:
            Epoch_Record: M(f) on the training contexts, validation perplexity and the tracked extras.
        """
        config = self.config
        result = evaluate_contexts(self.model, self._train_contexts, config.eval_batch_size)
        validation = None if self._valid_contexts is None else evaluate_contexts(self.model, self._valid_contexts, config.eval_batch_size).perplexity
        pos_record = None
        if config.track_pos and self.data.tagger is not None and self._train_contexts.pos_tag is not None:
            pos_record = pos_ratios(self.model, self._train_contexts, self.data.vocabulary, self.data.tagger, epoch, evaluation=result)
        units = None
        if config.track_memory_units and config.task is LM_Task.causal:
            units = memory_unit_lengths(correctness_bitmaps(self._train_contexts, result.correct), epoch)
        special_m, special_ppl = None, None
        if self._injection is not None and epoch > self._injection.epochs[0]:
            special_m, special_ppl = self._special_metrics()
        return Epoch_Record(epoch, result.memorization, validation, self.counters.tokens_processed, pos_record, units, special_m, special_ppl)

    def inject(self, epoch: int) -> tuple[float, float]:
        """Train on the special batch after the given epoch.

        Args:
            epoch (int): The epoch the injection follows.

        Returns:
            tuple[float, float]: Special-batch M(f) and perplexity right after the injection.
        """
        assert self._injection is not None and self._special is not None
        plan = self._injection
        if plan.reset_schedule:
            self.counters.schedule_offset_tokens = float(self.schedule_tokens)
            self.schedule = self._schedule(self.counters.schedule_offset_tokens)
        size = len(self._special)
        lengths = [len(sequence) for sequence in self._special]
        if plan.interleave:
            orders = [np.random.default_rng([self.config.seed, SPECIAL_STREAM_BASE, epoch]).permutation(np.tile(np.arange(size), plan.repetitions)).tolist()]
        else:
            orders = [np.random.default_rng([self.config.seed, SPECIAL_STREAM_BASE + repetition, epoch]).permutation(size).tolist() for repetition in range(plan.repetitions)]
        batch_id = 0
        for order in orders:
            for batch in greedy_batches(order, lengths, self.config.batch_tokens):
                self.train_batch([self._special[i] for i in batch], epoch, batch_id, SPECIAL_STREAM_BASE + epoch, phase="inject")
                batch_id += 1
        memorization, perplexity = self._special_metrics()
        self.metric_log.append(
            make_record(self.run_id, INJECTION_KIND, epoch, self.counters.tokens_processed, self._wall_time(), special_M=memorization, special_ppl=perplexity, repetitions=plan.repetitions)
        )
        return memorization, perplexity

    def checkpoint_path(self, epoch: int) -> Path:
        return self.run_dir / CHECKPOINT_DIR / f"epoch-{epoch:04d}.ckpt"

    def save(self) -> Path:
        return save_checkpoint(self.checkpoint_path(self.counters.epoch), self.model, self.counters, self.optimizer)

    def restore(self, path: Path, pending_injection: bool = False) -> None:
        """Continue from a checkpoint.

        Args:
            path (Path): The checkpoint.
            pending_injection (bool, optional): True when the checkpoint precedes an injection at its epoch that has not happened yet. Defaults to False.
        """
        model, counters, optimizer = load_checkpoint(path)
        if model.config != self.model_config:
            raise Setup_Exception(f"Checkpoint {path} was written for a different model: {model.config.canonical_json()}")
        if optimizer is None:
            raise Setup_Exception(f"Checkpoint {path} has no optimizer state")
        self.model, self.counters, self.optimizer = model, counters, optimizer
        self.schedule = self._schedule(counters.schedule_offset_tokens)
        self._pending_injection = pending_injection
        kept = self.metric_log.truncate_after(counters.epoch, counters.update)
        resumed = history_from_records(kept, self.param_count, self.config.config_hash)
        self.history.epochs, self.history.updates = resumed.epochs, resumed.updates

    def latest_checkpoint(self) -> Path | None:
        checkpoints = sorted((self.run_dir / CHECKPOINT_DIR).glob("epoch-*.ckpt"))
        return checkpoints[-1] if checkpoints else None

    def _should_evaluate(self, epoch: int, final: bool) -> bool:
        if final or epoch % self.config.eval_every == 0:
            return True
        return self._injection is not None and epoch > self._injection.epochs[0]

    def run(self, tolerate_divergence: bool = False) -> Memorization_History:
        """Train until the budget is spent, evaluating, injecting and checkpointing at epoch boundaries.

        Args:
            tolerate_divergence (bool, optional): Complete the log of a run whose loss or gradients become non-finite, marking it diverged, instead of aborting. Defaults to False.

        Returns:
            Memorization_History: The complete history of the run.

        Raises:
            Numeric_Exception: If training diverges and divergence is not tolerated.
        """
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.config.write_resolved(self.run_dir)
        self.data.train.write_manifest(self.run_dir / "dataset.json")
        try:
            self._train()
            summary = self.summary()
        except Numeric_Exception as error:
            if not tolerate_divergence:
                raise
            summary = {**self.summary(), "diverged": str(error)}
        self.metric_log.complete(self.run_id, summary)
        write_run_figures(self.run_dir)
        return self.history

    def _train(self) -> None:
        config = self.config
        if self._pending_injection:
            self.inject(self.counters.epoch)
            self._pending_injection = False
            self.save()
        for epoch in count(self.counters.epoch + 1):
            if config.max_epochs is not None and epoch > config.max_epochs:
                break
            for batch_id, batch in enumerate(self.epoch_batches(epoch)):
                if config.max_updates is not None and self.counters.update >= config.max_updates:
                    break
                self.train_batch([self.data.train[i] for i in batch], epoch, batch_id, epoch)
            self.counters.epoch = epoch
            final = (config.max_epochs is not None and epoch == config.max_epochs) or (config.max_updates is not None and self.counters.update >= config.max_updates)
            if self._should_evaluate(epoch, final):
                record = self.evaluate(epoch)
                self.history.add_epoch(record)
                self.metric_log.append(epoch_record_to_log(self.run_id, record, self._wall_time()))
                if self._training_log is not None:
                    self._training_log.epoch_summary(self.run_id, epoch, record.memorization, record.validation_perplexity)
            injects = self._injection is not None and epoch in self._injection.epochs and not final
            if injects:
                self.inject(epoch)
            if final or injects or epoch % config.checkpoint_every == 0:
                self.save()
            if final:
                break

    def crossings(self) -> list[Threshold_Crossing]:
        """
        Returns:
            list[Threshold_Crossing]: The run's crossing of every configured threshold, in epochs for epoch budgets and in updates for update budgets.
        """
        kind = Crossing_Kind.epoch if self.config.max_epochs is not None else Crossing_Kind.update
        return [run_crossing(self.history, tau, kind) for tau in self.config.taus]

    def summary(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "config_hash": self.config.config_hash,
            "param_count": self.param_count,
            "vocab_size": len(self.data.vocabulary),
            "max_lr": self.max_lr,
            "epoch_budget": self.config.max_epochs,
            "update_budget": self.config.max_updates,
            "mean_packed_length": self.data.train.mean_length,
            "truncated_sequences": self.data.train.truncated_count,
            "crossings": [crossing.to_dict() for crossing in self.crossings()],
        }


def report_crossings(config: Run_Config, crossings: Sequence[Threshold_Crossing]) -> None:
    """
    Args:
        config (Run_Config): The run configuration.
        crossings (Sequence[Threshold_Crossing]): The run's crossings.

    Raises:
        Unreached_Threshold_Exception: In strict mode, for the first unreached threshold. Otherwise an Unreached_Threshold_Warning is issued per unreached threshold.
    """
    for crossing in crossings:
        if crossing.reached:
            continue
        if config.strict_thresholds:
            raise Unreached_Threshold_Exception(config.resolved_run_id, crossing.tau, crossing.budget)
        warnings.warn(Unreached_Threshold_Warning(config.resolved_run_id, crossing.tau, crossing.budget), stacklevel=2)


def load_completed_history(config: Run_Config) -> Memorization_History | None:
    """
    Args:
        config (Run_Config): A run configuration.

    Returns:
        Memorization_History | None: The history of the run if its metric log is complete, otherwise None.
    """
    path = config.run_dir / METRICS_FILE
    if not is_complete(path):
        return None
    return history_from_records(read_records(path))


def run_training(
    config: Run_Config,
    training_log: Training_Log | None = None,
    warning_log: Memorization_Warning_Log | None = None,
    data: Experiment_Data | None = None,
    tolerate_divergence: bool = False,
) -> Memorization_History:
    """Train a run to completion, resuming from its latest checkpoint when one exists.

    A run whose metric log is already complete is not retrained; its history is read back from the log.

    Args:
        config (Run_Config): The run configuration.
        training_log (Training_Log, optional): Progress log. Defaults to no progress output.
        warning_log (Memorization_Warning_Log, optional): Log receiving laboratory warnings. Defaults to letting warnings propagate.
        data (Experiment_Data, optional): Prepared datasets. Defaults to preparing them from the configuration.
        tolerate_divergence (bool, optional): Record a diverging run as diverged instead of aborting. Defaults to False.

    Returns:
        Memorization_History: The run's history.
    """
    with routed_warnings(warning_log, config.resolved_run_id):
        completed = load_completed_history(config)
        if completed is not None:
            return completed
        if config.preset is not None and is_paper_preset(config.preset):
            warnings.warn(Paper_Scale_Override_Warning(config.preset, config.model_config(config.vocab_size).param_count), stacklevel=2)
        trainer = Trainer(config, prepare_experiment_data(config) if data is None else data, training_log=training_log)
        latest = trainer.latest_checkpoint()
        if latest is not None:
            trainer.restore(latest)
        else:
            trainer.metric_log.truncate_after(0, 0)
        history = trainer.run(tolerate_divergence)
        report_crossings(config, trainer.crossings())
        return history
