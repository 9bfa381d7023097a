"""The forgetting protocols: inject the held-out special batch into a run and follow its memorization as training continues."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from lm_memorization.corpus_pipeline.Packed_Dataset import Packed_Dataset
from lm_memorization.experiment_harness.experiment_data import Experiment_Data, prepare_experiment_data
from lm_memorization.experiment_harness.Experiment_Summary import Experiment_Summary, completed_entry, experiment_id
from lm_memorization.experiment_harness.Forgetting_Curve import Forgetting_Curve, forgetting_curve
from lm_memorization.experiment_harness.job_pool import forgetting_job, run_jobs, training_job
from lm_memorization.experiment_harness.metric_log import METRICS_FILE, Metric_Log, is_complete, read_records
from lm_memorization.experiment_harness.Run_Config import Experiment_Kind, Run_Config
from lm_memorization.experiment_harness.Trainer import CHECKPOINT_DIR, Injection_Plan, Trainer, routed_warnings, run_training
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Setup_Exception
from lm_memorization.lm_memorization_logging.memorization_logger import Memorization_Warning_Log, Training_Log

DEFAULT_REPETITIONS = (1, 2, 4)
DEFAULT_SPACING_PERIODS = (2, 4)
DEFAULT_INJECTION_FRACTIONS = (0.2, 0.5, 0.8)


def check_disjoint(train: Packed_Dataset, special: Packed_Dataset) -> None:
    """
    Args:
        train (Packed_Dataset): The training data.
        special (Packed_Dataset): The special batch.

    Raises:
        Setup_Exception: If any special-batch sequence has the same content as a training sequence.
    """
    overlap = train.content_hashes() & special.content_hashes()
    if overlap:
        raise Setup_Exception(f"{len(overlap)} special-batch sequences also occur in the training data")


def base_config(config: Run_Config) -> Run_Config:
    """
    Args:
        config (Run_Config): A forgetting-arm configuration.

    Returns:
        Run_Config: The plain training run the arm branches from, checkpointed every epoch. Arms that differ only in how they inject share it.
    """
    return config.with_changes(
        run_id=None,
        experiment=Experiment_Kind.train,
        inject_epoch=None,
        repetitions=1,
        spacing_period=None,
        reset_schedule_on_injection=False,
        interleave_repetitions=False,
        checkpoint_every=1,
    )


def _seed_arm_log(base: Run_Config, arm: Run_Config) -> None:
    """Start the arm's metric log with the base run's records, relabelled with the arm's run id."""
    log = Metric_Log(arm.run_dir / METRICS_FILE)
    log.truncate_after(0, 0)
    for record in read_records(base.run_dir / METRICS_FILE):
        if record["kind"] != "complete":
            log.append({**record, "run_id": arm.resolved_run_id})


def run_forgetting(
    config: Run_Config, training_log: Training_Log | None = None, warning_log: Memorization_Warning_Log | None = None, data: Experiment_Data | None = None
) -> Forgetting_Curve:
    """Branch a run at its injection epoch, train on the special batch and continue normal training.

    The special batch is the whole validation set. The arm resumes from the base run's checkpoint at the injection epoch, so the base run is trained first if it has not been.
    With repetitions k the special batch is passed over k times at each injection; with a spacing period it is injected again every period epochs.

    Args:
        config (Run_Config): The arm configuration; needs valid_path and an epoch budget.
        training_log (Training_Log, optional): Progress log. Defaults to no progress output.
        warning_log (Memorization_Warning_Log, optional): Log receiving laboratory warnings. Defaults to letting warnings propagate.
        data (Experiment_Data, optional): Prepared datasets. Defaults to preparing them from the configuration.

    Returns:
        Forgetting_Curve: Special-batch memorization from the injection on.

    Raises:
        Setup_Exception: If there is no special batch, it overlaps the training data, or the base checkpoint is missing.
    """
    arm_log = config.run_dir / METRICS_FILE
    if is_complete(arm_log):
        return forgetting_curve(read_records(arm_log))
    with routed_warnings(warning_log, config.resolved_run_id):
        data = prepare_experiment_data(config) if data is None else data
        if data.valid is None:
            raise Setup_Exception("Forgetting runs need a validation corpus as the special batch")
        check_disjoint(data.train, data.valid)
        trainer = Trainer(config, data, special=data.valid, injection=Injection_Plan.from_config(config), training_log=training_log)
        latest = trainer.latest_checkpoint()
        if latest is not None:
            trainer.restore(latest)
        else:
            base = base_config(config)
            run_training(base, training_log, data=data)
            inject_epoch = config.resolved_inject_epoch
            checkpoint = base.run_dir / CHECKPOINT_DIR / f"epoch-{inject_epoch:04d}.ckpt"
            if not checkpoint.exists():
                raise Setup_Exception(f"Base run {base.resolved_run_id} has no checkpoint at epoch {inject_epoch}")
            _seed_arm_log(base, config)
            trainer.restore(checkpoint, pending_injection=True)
        trainer.run()
    return forgetting_curve(read_records(arm_log))


@dataclass
class Forgetting_Study:
    """Forgetting arms of one experiment and their curves.

    Attributes:
        summary (Experiment_Summary): The experiment summary.
        curves (dict[str, Forgetting_Curve]): Curve of every arm run, keyed by run id.
    """

    summary: Experiment_Summary
    curves: dict[str, Forgetting_Curve] = field(default_factory=dict)

    def baselines(self) -> dict[str, float]:
        return {run_id: curve.baseline for run_id, curve in self.curves.items()}

    def baseline_table(self) -> list[tuple[str, int, int, float]]:
        """
        Returns:
            list[tuple[str, int, int, float]]: (arm, param_count, seed, baseline) of every run, in summary order.
        """
        return [(entry.arm, entry.param_count, entry.seed, self.curves[entry.run_id].baseline) for entry in self.summary.runs]


def _run_arms(kind: Experiment_Kind, template: Run_Config, arms: Sequence[tuple[str, Run_Config]], workers: int, **parameters: object) -> Forgetting_Study:
    bases = list({base_config(config).resolved_run_id: base_config(config) for _, config in arms}.values())
    run_jobs(training_job, bases, workers)
    curves = run_jobs(forgetting_job, [config for _, config in arms], workers)
    summary = Experiment_Summary(experiment_id(kind, template, **parameters), kind, template.taus, [completed_entry(config, arm) for arm, config in arms], dict(parameters))
    summary.write(template.log_root_path)
    return Forgetting_Study(summary, {config.resolved_run_id: curve for (_, config), curve in zip(arms, curves, strict=True)})


def _arm(template: Run_Config, kind: Experiment_Kind, **changes: object) -> Run_Config:
    return template.with_changes(run_id=None, experiment=kind, **changes)


def forgetting_baseline_vs_scale(template: Run_Config, presets: Sequence[str], seeds: Sequence[int] | None = None, workers: int = 1) -> Forgetting_Study:
    """Run the single-injection arm for every model size.

    Every size injects at the same epoch, so the injection sits at the same fraction of training.

    Args:
        template (Run_Config): The arm configuration the sizes derive from.
        presets (Sequence[str]): Model presets, in increasing size.
        seeds (Sequence[int], optional): Seeds to repeat the study over. Defaults to the template seed.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        Forgetting_Study: One curve per (size, seed).
    """
    seeds = (template.seed,) if seeds is None else tuple(seeds)
    inject_epoch = template.resolved_inject_epoch
    arms = [(preset, _arm(template, Experiment_Kind.forgetting, preset=preset, model=None, seed=seed, inject_epoch=inject_epoch)) for seed in seeds for preset in presets]
    return _run_arms(Experiment_Kind.forgetting, template, arms, workers, presets=list(presets), seeds=list(seeds), inject_epoch=inject_epoch)


def injection_epoch_at(fraction: float, max_epochs: int) -> int:
    """
    Args:
        fraction (float): Fraction of training before the injection.
        max_epochs (int): The epoch budget.

    Returns:
        int: The nearest epoch to that fraction, clamped so that at least one epoch follows the injection.
    """
    return int(min(max_epochs - 1, max(1, round(fraction * max_epochs))))


@dataclass
class Order_Invariance_Result:
    """Forgetting baselines of one model injected at different points of training.

    Attributes:
        study (Forgetting_Study): The arms and curves.
        fractions (tuple[float, ...]): Injection fractions of the arms.
    """

    study: Forgetting_Study
    fractions: tuple[float, ...]

    def spread(self, seed: int | None = None) -> float:
        """
        Args:
            seed (int, optional): Restrict to one seed. Defaults to all runs.

        Returns:
            float: Largest minus smallest baseline among the arms.
        """
        baselines = [self.study.curves[entry.run_id].baseline for entry in self.study.summary.runs if seed is None or entry.seed == seed]
        return float(np.ptp(baselines)) if baselines else 0.0


def order_invariance_study(template: Run_Config, fractions: Sequence[float] = DEFAULT_INJECTION_FRACTIONS, seeds: Sequence[int] | None = None, workers: int = 1) -> Order_Invariance_Result:
    """Inject the special batch at different fractions of training and compare the forgetting baselines.

    Args:
        template (Run_Config): The arm configuration.
        fractions (Sequence[float], optional): Injection points as fractions of the epoch budget. Defaults to 20%, 50% and 80%.
        seeds (Sequence[int], optional): Seeds to repeat the study over. Defaults to the template seed.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        Order_Invariance_Result: The curves and their baseline spread.
    """
    assert template.max_epochs is not None
    seeds = (template.seed,) if seeds is None else tuple(seeds)
    arms = []
    for seed in seeds:
        for fraction in fractions:
            epoch = injection_epoch_at(fraction, template.max_epochs)
            arms.append((f"inject@{fraction:g}", _arm(template, Experiment_Kind.order_invariance, seed=seed, inject_epoch=epoch)))
    study = _run_arms(Experiment_Kind.order_invariance, template, arms, workers, fractions=list(fractions), seeds=list(seeds))
    return Order_Invariance_Result(study, tuple(fractions))


def run_repetition_study(
    template: Run_Config,
    repetitions: Sequence[int] = DEFAULT_REPETITIONS,
    periods: Sequence[int] = DEFAULT_SPACING_PERIODS,
    seeds: Sequence[int] | None = None,
    workers: int = 1,
) -> Forgetting_Study:
    """Compare repeated injection of the special batch with spaced re-injection.

    Args:
        template (Run_Config): The arm configuration.
        repetitions (Sequence[int], optional): Consecutive passes per injection of the repetition arms. Defaults to 1, 2 and 4.
        periods (Sequence[int], optional): Re-injection periods in epochs of the spaced arms. Defaults to 2 and 4.
        seeds (Sequence[int], optional): Seeds to repeat the study over. Defaults to the template seed.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        Forgetting_Study: One curve per arm and seed; arms are labelled k=<repetitions> and period=<epochs>.
    """
    seeds = (template.seed,) if seeds is None else tuple(seeds)
    inject_epoch = template.resolved_inject_epoch
    arms = []
    for seed in seeds:
        arms.extend((f"k={k}", _arm(template, Experiment_Kind.repetition, seed=seed, inject_epoch=inject_epoch, repetitions=k, spacing_period=None)) for k in repetitions)
        arms.extend((f"period={period}", _arm(template, Experiment_Kind.repetition, seed=seed, inject_epoch=inject_epoch, repetitions=1, spacing_period=period)) for period in periods)
    return _run_arms(Experiment_Kind.repetition, template, arms, workers, repetitions=list(repetitions), periods=list(periods), seeds=list(seeds))
