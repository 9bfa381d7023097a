"""Execution of independent runs, sequentially or in worker processes.

Every run owns its log directory, so runs of one experiment never share mutable state; a worker receives only a Run_Config.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

from lm_memorization.experiment_harness.Forgetting_Curve import Forgetting_Curve
from lm_memorization.experiment_harness.Run_Config import Run_Config
from lm_memorization.experiment_harness.Trainer import run_training
from lm_memorization.memorization_metrics.Memorization_History import Memorization_History

Job_Result = TypeVar("Job_Result")


def run_jobs(job: Callable[[Run_Config], Job_Result], configs: Sequence[Run_Config], workers: int = 1) -> list[Job_Result]:
    """
    Args:
        job (Callable[[Run_Config], Job_Result]): A module-level function running one configuration.
        configs (Sequence[Run_Config]): The configurations to run.
        workers (int, optional): Worker processes; 1 runs the configurations in order in this process. Defaults to 1.

    Returns:
        list[Job_Result]: The job results in configuration order.
    """
    if workers <= 1 or len(configs) <= 1:
        return [job(config) for config in configs]
    with ProcessPoolExecutor(max_workers=min(workers, len(configs))) as pool:
        return list(pool.map(job, configs))


def training_job(config: Run_Config) -> Memorization_History:
    return run_training(config)


def tolerant_training_job(config: Run_Config) -> Memorization_History:
    return run_training(config, tolerate_divergence=True)


def forgetting_job(config: Run_Config) -> Forgetting_Curve:
    # imported here: the forgetting protocols schedule their runs through this module
    from lm_memorization.experiment_harness.forgetting import run_forgetting

    return run_forgetting(config)
