"""Module containing the Adam_State class and the bias-corrected Adam update with zero weight decay."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception, Numeric_Exception
from lm_memorization.tensor_core.Tensor import Tensor

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.98
ADAM_EPS = 1e-8


@dataclass
class Adam_State:
    """Per-parameter moment estimates and the update counter of an Adam optimizer.

    Attributes:
        first_moments (dict[str, np.ndarray]): Exponential moving averages of gradients, keyed by parameter name.
        second_moments (dict[str, np.ndarray]): Exponential moving averages of squared gradients, keyed by parameter name.
        step (int): Number of updates applied so far.
        beta1 (float): First moment decay.
        beta2 (float): Second moment decay.
        eps (float): Denominator floor.
    """

    first_moments: dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_parameters(cls, parameters: Mapping[str, Tensor]) -> Adam_State:
        """
        Args:
            parameters (Mapping[str, Tensor]): The parameters to optimize.

        Returns:
            Adam_State: A fresh state with zero moments shaped like the parameters.
        """
        return cls(
            first_moments={name: np.zeros_like(t.data) for name, t in parameters.items()},
            second_moments={name: np.zeros_like(t.data) for name, t in parameters.items()},
        )

    def copy(self) -> Adam_State:
        """
        Returns:
            Adam_State: A deep copy of this state.
        """
        return Adam_State(
            {k: v.copy() for k, v in self.first_moments.items()}, {k: v.copy() for k, v in self.second_moments.items()}, self.step, self.beta1, self.beta2, self.eps
        )


def adam_step(parameters: Mapping[str, Tensor], state: Adam_State, lr: float) -> None:
    """Apply one bias-corrected Adam update in place.

    Args:
        parameters (Mapping[str, Tensor]): Parameters with populated gradients.
        state (Adam_State): The optimizer state; its step counter increases by exactly one.
        lr (float): The learning rate of this update.

    Raises:
        Numeric_Exception: If any gradient contains NaN or Inf. No parameter is modified in that case.
        Config_Exception: If the state does not track exactly the given parameters.
    """
    if set(parameters) != set(state.first_moments):
        raise Config_Exception("Optimizer state does not match the model parameters")
    for name, tensor in parameters.items():
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise Numeric_Exception(f"gradient of {name}", f"update {state.step + 1}")
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, tensor in parameters.items():
        gradient = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        first = state.first_moments[name]
        second = state.second_moments[name]
        first *= state.beta1
        first += (1.0 - state.beta1) * gradient
        second *= state.beta2
        second += (1.0 - state.beta2) * gradient * gradient
        corrected_first = first / correction1
        corrected_second = second / correction2
        tensor.data -= (lr * corrected_first / (np.sqrt(corrected_second) + state.eps)).astype(tensor.data.dtype, copy=False)
