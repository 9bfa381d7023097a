"""Module containing the Lr_Schedule class: linear warmup from 0 to the maximum learning rate, then linear decay to 0, measured in tokens processed."""

from __future__ import annotations

from dataclasses import dataclass, replace

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception

# Ratio of 375M warmup tokens to a 100B-token causal run, preserved at desk scale.
WARMUP_FRACTION = 375e6 / 100e9


@dataclass(frozen=True)
class Lr_Schedule:
    """A degree-one polynomial learning-rate schedule.

    Attributes:
        max_lr (float): The peak learning rate reached at warmup_tokens.
        warmup_tokens (float): Tokens W over which the rate ramps up from 0.
        total_tokens (float): Tokens T at which the rate returns to 0.
        offset_tokens (float): Tokens processed before this schedule started; non-zero only for a restarted schedule.
    """

    max_lr: float
    warmup_tokens: float
    total_tokens: float
    offset_tokens: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.warmup_tokens < self.total_tokens:
            raise Config_Exception(f"Schedule requires 0 < warmup ({self.warmup_tokens}) < total ({self.total_tokens})")
        if self.max_lr <= 0:
            raise Config_Exception(f"Maximum learning rate must be positive but got {self.max_lr}")

    @classmethod
    def for_run(cls, max_lr: float, total_tokens: float, warmup_fraction: float = WARMUP_FRACTION) -> Lr_Schedule:
        """
        Args:
            max_lr (float): Peak learning rate.
            total_tokens (float): Tokens processed over the whole run.
            warmup_fraction (float, optional): Warmup as a fraction of the run. Defaults to the 375M / 100B ratio.

        Returns:
            Lr_Schedule: A schedule whose warmup is at least one token and shorter than the run.
        """
        if total_tokens < 2:
            raise Config_Exception(f"A schedule needs at least 2 tokens but got {total_tokens}")
        warmup = min(max(1.0, warmup_fraction * total_tokens), total_tokens - 1.0)
        return cls(max_lr=max_lr, warmup_tokens=warmup, total_tokens=float(total_tokens))

    def restarted(self, at_tokens: float, remaining_tokens: float) -> Lr_Schedule:
        """
        Args:
            at_tokens (float): Tokens processed when the schedule restarts.
            remaining_tokens (float): Tokens left in the run after the restart.

        Returns:
            Lr_Schedule: A schedule with a fresh warmup and decay over the remaining tokens, starting at at_tokens.
        """
        fresh = Lr_Schedule.for_run(self.max_lr, remaining_tokens)
        return replace(fresh, offset_tokens=float(at_tokens))

    def lr_at(self, tokens_processed: float) -> float:
        """
        Args:
            tokens_processed (float): Tokens processed so far.

        Returns:
            float: The learning rate; 0 at the start, max_lr at the end of warmup, 0 at and beyond total_tokens.
        """
        tokens = tokens_processed - self.offset_tokens
        if tokens <= 0:
            return 0.0
        if tokens < self.warmup_tokens:
            return self.max_lr * tokens / self.warmup_tokens
        if tokens < self.total_tokens:
            return self.max_lr * (self.total_tokens - tokens) / (self.total_tokens - self.warmup_tokens)
        return 0.0


def lr_at(schedule: Lr_Schedule, tokens_processed: float) -> float:
    """
    Args:
        schedule (Lr_Schedule): The schedule.
        tokens_processed (float): Tokens processed so far.

    Returns:
        float: The learning rate at that point of training.
    """
    return schedule.lr_at(tokens_processed)
