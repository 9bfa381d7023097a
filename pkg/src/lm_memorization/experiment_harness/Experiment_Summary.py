"""Module containing the Experiment_Summary class: the run set of one experiment, written next to the run directories."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from lm_memorization.experiment_harness.metric_log import METRICS_FILE, history_from_records, is_complete, read_records
from lm_memorization.experiment_harness.Run_Config import Experiment_Kind, Run_Config
from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Log_Write_Exception, Missing_Runs_Exception
from lm_memorization.memorization_metrics.Memorization_History import Crossing_Kind, Memorization_History

EXPERIMENTS_DIR = "experiments"


@dataclass(frozen=True)
class Run_Entry:
    """The identifying fields of one run of an experiment.

    Attributes:
        run_id (str): The run directory name.
        arm (str): The arm of the experiment the run belongs to, such as a docid mode or a repetition label.
        preset (str | None): The model preset.
        param_count (int): The model size N.
        seed (int): The run seed.
        task (str): causal or masked.
        learning_rate (float): The maximum learning rate the run used.
        data_fraction (float): Fraction of training documents used.
        max_epochs (int | None): Epoch budget.
        max_updates (int | None): Update budget.
        inject_epoch (int | None): Injection epoch of forgetting runs.
        repetitions (int): Special-batch passes per injection.
        spacing_period (int | None): Re-injection period of spaced arms.
    """

    run_id: str
    arm: str
    preset: str | None
    param_count: int
    seed: int
    task: str
    learning_rate: float
    data_fraction: float = 1.0
    max_epochs: int | None = None
    max_updates: int | None = None
    inject_epoch: int | None = None
    repetitions: int = 1
    spacing_period: int | None = None

    @property
    def crossing_kind(self) -> Crossing_Kind:
        return Crossing_Kind.epoch if self.max_epochs is not None else Crossing_Kind.update

    @classmethod
    def from_config(cls, config: Run_Config, param_count: int, learning_rate: float, arm: str = "") -> Run_Entry:
        """
        Args:
            config (Run_Config): The run configuration.
            param_count (int): The model size of the run.
            learning_rate (float): The maximum learning rate the run resolved.
            arm (str, optional): The arm label. Defaults to no label.

        Returns:
            Run_Entry: The entry describing the run.
        """
        return cls(
            run_id=config.resolved_run_id,
            arm=arm,
            preset=config.preset,
            param_count=param_count,
            seed=config.seed,
            task=str(config.task),
            learning_rate=learning_rate,
            data_fraction=config.data_fraction,
            max_epochs=config.max_epochs,
            max_updates=config.max_updates,
            inject_epoch=config.inject_epoch,
            repetitions=config.repetitions,
            spacing_period=config.spacing_period,
        )


@dataclass
class Experiment_Summary:
    """An experiment: its kind, thresholds and the runs that make it up.

    Attributes:
        experiment_id (str): Name of the summary file under the experiments directory.
        kind (Experiment_Kind): The experiment family.
        taus (tuple[float, ...]): Thresholds reported for every run.
        runs (list[Run_Entry]): The runs, in the order they were planned.
        parameters (dict[str, Any]): Experiment-level settings such as the learning-rate grid.
    """

    experiment_id: str
    kind: Experiment_Kind
    taus: tuple[float, ...]
    runs: list[Run_Entry] = field(default_factory=list)
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def run_ids(self) -> list[str]:
        return [entry.run_id for entry in self.runs]

    def to_dict(self) -> dict[str, Any]:
        return {"experiment_id": self.experiment_id, "kind": self.kind.value, "taus": list(self.taus), "runs": [asdict(entry) for entry in self.runs], "parameters": self.parameters}

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> Experiment_Summary:
        return cls(values["experiment_id"], Experiment_Kind(values["kind"]), tuple(values["taus"]), [Run_Entry(**entry) for entry in values["runs"]], dict(values.get("parameters", {})))

    def write(self, log_root: str | Path) -> Path:
        """
        Args:
            log_root (str | Path): The log root holding the run directories.

        Returns:
            Path: The written summary file.

        Raises:
            Log_Write_Exception: If the summary cannot be written.
        """
        path = Path(log_root) / EXPERIMENTS_DIR / f"{self.experiment_id}.json"
        partial = path.with_name(path.name + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            partial.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
            os.replace(partial, path)
        except OSError as error:
            raise Log_Write_Exception(str(path), error) from error
        return path

    def histories(self, log_root: str | Path) -> dict[str, Memorization_History]:
        """
        Args:
            log_root (str | Path): The log root holding the run directories.

        Returns:
            dict[str, Memorization_History]: The history of every run, keyed by run id.

        Raises:
            Missing_Runs_Exception: If any run's metric log is absent or incomplete.
        """
        missing = missing_runs(log_root, self.run_ids)
        if missing:
            raise Missing_Runs_Exception(missing)
        return {run_id: history_from_records(read_records(Path(log_root) / run_id / METRICS_FILE)) for run_id in self.run_ids}


def experiment_id(kind: Experiment_Kind, template: Run_Config, **parameters: Any) -> str:
    """
    Args:
        kind (Experiment_Kind): The experiment family.
        template (Run_Config): The configuration the runs derive from.
        **parameters (Any): The experiment-level settings.

    Returns:
        str: The kind followed by a digest of the template hash and the settings.
    """
    identity = json.dumps({"template": template.config_hash, "parameters": parameters}, sort_keys=True, separators=(",", ":"), default=str)
    return f"{kind}-{hashlib.sha256(identity.encode('utf-8')).hexdigest()[:12]}"


def missing_runs(log_root: str | Path, run_ids: list[str]) -> list[str]:
    """
    Args:
        log_root (str | Path): The log root.
        run_ids (list[str]): The runs to look for.

    Returns:
        list[str]: The runs whose metric log is absent or lacks a valid completion record.
    """
    return [run_id for run_id in run_ids if not is_complete(Path(log_root) / run_id / METRICS_FILE)]


def load_experiments(log_root: str | Path) -> list[Experiment_Summary]:
    """
    Args:
        log_root (str | Path): The log root.

    Returns:
        list[Experiment_Summary]: Every experiment summary under the log root, ordered by experiment id.
    """
    directory = Path(log_root) / EXPERIMENTS_DIR
    if not directory.is_dir():
        return []
    return [Experiment_Summary.from_dict(json.loads(path.read_text(encoding="utf-8"))) for path in sorted(directory.glob("*.json"))]


def completed_entry(config: Run_Config, arm: str = "") -> Run_Entry:
    """
    Args:
        config (Run_Config): The configuration of a finished run.
        arm (str, optional): The arm label. Defaults to no label.

    Returns:
        Run_Entry: The entry of the run, with model size and learning rate read from its completion record.
    """
    records = read_records(config.run_dir / METRICS_FILE)
    summary = records[-1].get("summary", {}) if records else {}
    return Run_Entry.from_config(config, int(summary.get("param_count", 0)), float(summary.get("max_lr", 0.0)), arm)
