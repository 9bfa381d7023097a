"""Module containing the Grad_Tape class which records differentiable operations and replays them in reverse."""

from __future__ import annotations

import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from types import TracebackType

import numpy as np

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Input_Exception, Numeric_Exception, Tape_Consumed_Exception
from lm_memorization.tensor_core.Tensor import Tensor

Backward_Rule = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_thread_state = threading.local()


@dataclass(frozen=True)
class Tape_Record:
    """A single recorded operation.

    Attributes:
        name (str): The operation name, used in numeric diagnostics.
        inputs (tuple[Tensor, ...]): The operands of the operation.
        output (Tensor): The tensor produced by the operation.
        rule (Backward_Rule): Maps the gradient of the output to one gradient (or None) per input.
    """

    name: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    rule: Backward_Rule


class Grad_Tape:
    """An ordered record of differentiable operations.

    A tape becomes active for the current thread inside a with-block; operations executed while it is active and whose inputs require gradients are recorded on it.
    Outside of any tape, operations compute values only, which is how frozen models are evaluated for metrics.

    A tape can be replayed once. Replaying visits records in reverse recording order, so every tensor is visited after all of its consumers and gradient contributions are summed.
    """

    def __init__(self) -> None:
        self._records: list[Tape_Record] = []
        self._consumed: bool = False

    @staticmethod
    def current() -> Grad_Tape | None:
        """
        Returns:
            Grad_Tape | None: The innermost tape active on this thread, or None if no tape is recording.
        """
        stack: list[Grad_Tape] = getattr(_thread_state, "stack", [])
        return stack[-1] if stack else None

    def __enter__(self) -> Grad_Tape:
        if self._consumed:
            raise Tape_Consumed_Exception()
        if not hasattr(_thread_state, "stack"):
            _thread_state.stack = []
        _thread_state.stack.append(self)
        return self

    def __exit__(self, exc_type: type[BaseException] | None, exc: BaseException | None, traceback: TracebackType | None) -> None:
        _thread_state.stack.remove(self)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def consumed(self) -> bool:
        """
        Returns:
            bool: True if backward has already been replayed on this tape.
        """
        return self._consumed

    def record(self, name: str, output: Tensor, inputs: Sequence[Tensor], rule: Backward_Rule) -> None:
        """Append an operation to the tape.

        Args:
            name (str): The operation name.
            output (Tensor): The tensor produced by the operation.
            inputs (Sequence[Tensor]): The operands of the operation.
            rule (Backward_Rule): The backward rule of the operation.
        """
        if self._consumed:
            raise Tape_Consumed_Exception()
        self._records.append(Tape_Record(name, tuple(inputs), output, rule))

    def backward(self, loss: Tensor) -> None:
        """Replay the tape in reverse, populating the grad of every tensor that requires gradients and is reachable from the loss.

        Args:
            loss (Tensor): A single-element tensor produced through this tape.

        Raises:
            Tape_Consumed_Exception: If this tape has already been replayed.
            Input_Exception: If the loss is not a single element.
            Numeric_Exception: If a non-finite gradient is produced.
        """
        if self._consumed:
            raise Tape_Consumed_Exception()
        if loss.size != 1:
            raise Input_Exception("Backward requires a scalar loss", loss.shape)
        self._consumed = True
        loss.requires_grad = True
        loss.grad = np.ones_like(loss.data)
        for record in reversed(self._records):
            output_grad = record.output.grad
            if output_grad is None:
                continue
            input_grads = record.rule(output_grad)
            for operand, gradient in zip(record.inputs, input_grads, strict=True):
                if gradient is None or not operand.requires_grad:
                    continue
                if not np.all(np.isfinite(gradient)):
                    raise Numeric_Exception(f"backward of {record.name}", f"gradient for {operand!r}")
                operand.accumulate_grad(gradient)
        self._records.clear()


def backward(loss: Tensor, tape: Grad_Tape) -> None:
    """Populate gradients of every tensor reachable from the loss through the tape.

    Args:
        loss (Tensor): The scalar loss.
        tape (Grad_Tape): The tape that recorded the loss computation.
    """
    tape.backward(loss)
