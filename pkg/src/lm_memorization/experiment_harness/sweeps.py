"""The training experiments: model-size, learning-rate and dataset-size sweeps and the unique identifier arms."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from lm_memorization.corpus_pipeline.doc_ids import Doc_Id_Mode
from lm_memorization.experiment_harness.Experiment_Summary import Experiment_Summary, Run_Entry, completed_entry, experiment_id
from lm_memorization.experiment_harness.job_pool import run_jobs, tolerant_training_job, training_job
from lm_memorization.experiment_harness.Run_Config import Experiment_Kind, Run_Config
from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.memorization_metrics.Memorization_History import Memorization_History
from lm_memorization.memorization_metrics.thresholds import Threshold_Crossing, run_crossing

DEFAULT_LR_TAU = 0.9
MIN_LR_GRID_SPAN = 10.0
DEFAULT_DATA_FRACTIONS = (0.25, 0.5, 1.0)


@dataclass
class Sweep_Result:
    """Runs of one experiment and their histories.

    Attributes:
        summary (Experiment_Summary): The experiment summary.
        histories (dict[str, Memorization_History]): History of every run, keyed by run id.
    """

    summary: Experiment_Summary
    histories: dict[str, Memorization_History] = field(default_factory=dict)

    def crossings(self, taus: Sequence[float] | None = None) -> list[tuple[Run_Entry, Threshold_Crossing]]:
        """
        Args:
            taus (Sequence[float], optional): Thresholds to report. Defaults to the experiment's thresholds.

        Returns:
            list[tuple[Run_Entry, Threshold_Crossing]]: The crossing of every (run, tau) pair, in epochs for epoch budgets and in updates for update budgets.
        """
        taus = self.summary.taus if taus is None else taus
        return [(entry, run_crossing(self.histories[entry.run_id], tau, entry.crossing_kind)) for entry in self.summary.runs for tau in taus]

    def crossing_table(self, taus: Sequence[float] | None = None) -> dict[tuple[int, int], dict[float, Threshold_Crossing]]:
        """
        Args:
            taus (Sequence[float], optional): Thresholds to report. Defaults to the experiment's thresholds.

        Returns:
            dict[tuple[int, int], dict[float, Threshold_Crossing]]: Rows keyed by (param_count, seed), each mapping tau to its crossing.
        """
        table: dict[tuple[int, int], dict[float, Threshold_Crossing]] = {}
        for entry, crossing in self.crossings(taus):
            table.setdefault((entry.param_count, entry.seed), {})[crossing.tau] = crossing
        return table


def _run_sweep(
    kind: Experiment_Kind,
    template: Run_Config,
    arms: Sequence[tuple[str, Run_Config]],
    workers: int,
    job: Callable[[Run_Config], Memorization_History] = training_job,
    **parameters: object,
) -> Sweep_Result:
    histories = run_jobs(job, [config for _, config in arms], workers)
    summary = Experiment_Summary(experiment_id(kind, template, **parameters), kind, template.taus, [completed_entry(config, arm) for arm, config in arms], dict(parameters))
    summary.write(template.log_root_path)
    return Sweep_Result(summary, {config.resolved_run_id: history for (_, config), history in zip(arms, histories, strict=True)})


def _seeds(template: Run_Config, seeds: Sequence[int] | None) -> tuple[int, ...]:
    return (template.seed,) if seeds is None else tuple(seeds)


def run_scaling_sweep(template: Run_Config, presets: Sequence[str], seeds: Sequence[int] | None = None, workers: int = 1) -> Sweep_Result:
    """Train every model size on the same data and report T(N, tau) for the template's thresholds.

    Each size takes its preset learning rate unless the template fixes one. A size that never reaches a threshold is reported as unreached at its budget.

    Args:
        template (Run_Config): The configuration every run derives from.
        presets (Sequence[str]): Model presets.
        seeds (Sequence[int], optional): Seeds to repeat the sweep over. Defaults to the template seed.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        Sweep_Result: One run per (size, seed).
    """
    seeds = _seeds(template, seeds)
    arms = [(preset, template.with_changes(run_id=None, experiment=Experiment_Kind.scale_sweep, preset=preset, model=None, seed=seed)) for seed in seeds for preset in presets]
    return _run_sweep(Experiment_Kind.scale_sweep, template, arms, workers, presets=list(presets), seeds=list(seeds))


def run_lr_sweep(template: Run_Config, presets: Sequence[str], learning_rates: Sequence[float], seeds: Sequence[int] | None = None, workers: int = 1) -> Sweep_Result:
    """Train every (size, learning rate) pair and report T(N, 0.9) against the learning rate.

    A run that diverges or stalls is recorded as unreached.

    Args:
        template (Run_Config): The configuration every run derives from.
        presets (Sequence[str]): Model presets.
        learning_rates (Sequence[float]): The learning-rate grid; it must span at least one order of magnitude.
        seeds (Sequence[int], optional): Seeds to repeat the sweep over. Defaults to the template seed.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        Sweep_Result: One run per (size, learning rate, seed); the summary thresholds are (0.9,).

    Raises:
        Config_Exception: If the grid spans less than a factor of ten or holds a non-positive rate.
    """
    grid = sorted(float(rate) for rate in learning_rates)
    if not grid or grid[0] <= 0:
        raise Config_Exception(f"Learning rates must be positive but got {list(learning_rates)}")
    if grid[-1] / grid[0] < MIN_LR_GRID_SPAN:
        raise Config_Exception(f"Learning-rate grid must span at least {MIN_LR_GRID_SPAN:g}x but spans {grid[-1] / grid[0]:g}x")
    seeds = _seeds(template, seeds)
    template = template.with_changes(taus=(DEFAULT_LR_TAU,))
    arms = [
        (f"lr={rate:g}", template.with_changes(run_id=None, experiment=Experiment_Kind.lr_sweep, preset=preset, model=None, seed=seed, learning_rate=rate, strict_thresholds=False))
        for seed in seeds
        for preset in presets
        for rate in grid
    ]
    return _run_sweep(Experiment_Kind.lr_sweep, template, arms, workers, tolerant_training_job, presets=list(presets), learning_rates=grid, seeds=list(seeds))


def run_data_size_sweep(
    template: Run_Config, presets: Sequence[str], fractions: Sequence[float] = DEFAULT_DATA_FRACTIONS, seeds: Sequence[int] | None = None, workers: int = 1
) -> Sweep_Result:
    """Repeat the size sweep on growing prefixes of the training documents.

    Every fraction shares the vocabulary of the full training corpus, so model sizes are equal across fractions.

    Args:
        template (Run_Config): The configuration every run derives from.
        presets (Sequence[str]): Model presets.
        fractions (Sequence[float], optional): Fractions of training documents. Defaults to a quarter, a half and all.
        seeds (Sequence[int], optional): Seeds to repeat the sweep over. Defaults to the template seed.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        Sweep_Result: One run per (fraction, size, seed), labelled by fraction.
    """
    seeds = _seeds(template, seeds)
    arms = [
        (f"fraction={fraction:g}", template.with_changes(run_id=None, experiment=Experiment_Kind.data_sweep, preset=preset, model=None, seed=seed, data_fraction=fraction))
        for seed in seeds
        for fraction in fractions
        for preset in presets
    ]
    return _run_sweep(Experiment_Kind.data_sweep, template, arms, workers, presets=list(presets), fractions=list(fractions), seeds=list(seeds))


def run_docid_experiment(template: Run_Config, seeds: Sequence[int] | None = None, workers: int = 1) -> Sweep_Result:
    """Train the control, vocabulary-only and prepend arms from one corpus and seed.

    The control arm is the template run on the unmodified dataset and the vocabulary-only arm packs the same sequences with a larger vocabulary. Only the prepend arm packs with room for the identifier prefix.

    Args:
        template (Run_Config): The configuration every arm derives from.
        seeds (Sequence[int], optional): Seeds to repeat the experiment over. Defaults to the template seed.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        Sweep_Result: One run per (arm, seed), labelled by docid mode.
    """
    seeds = _seeds(template, seeds)
    arms = [
        (str(mode), template.with_changes(run_id=None, experiment=Experiment_Kind.docid, docid_mode=mode, seed=seed))
        for seed in seeds
        for mode in Doc_Id_Mode
    ]
    return _run_sweep(Experiment_Kind.docid, template, arms, workers, seeds=list(seeds))
