"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception
from lm_memorization.tensor_core.Grad_Tape import Grad_Tape
from lm_memorization.tensor_core.Tensor import VERIFICATION_DTYPE, Tensor

GRADIENT_FLOOR = 1e-8


def finite_difference_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5, samples: int = 100, seed: int = 0, floor: float = GRADIENT_FLOOR) -> float:
    """Compare the tape gradient of a scalar function against central differences.

    The relative error of a coordinate is |analytic - central| / max(|analytic|, |central|, floor).
    Coordinates are sampled without replacement; all coordinates are checked when x has no more than `samples` elements.

    Args:
        f (Callable[[Tensor], Tensor]): Scalar function of x. It must read x.data on every call, since x is perturbed in place.
        x (Tensor): A 64-bit tensor that requires gradients.
        h (float, optional): Perturbation size. Defaults to 1e-5.
        samples (int, optional): Number of coordinates to check. Defaults to 100.
        seed (int, optional): Seed for coordinate sampling. Defaults to 0.
        floor (float, optional): Lower bound of the error denominator. Defaults to 1e-8; a function with structurally zero gradients, such as the key bias under softmax, needs a larger one.

    Returns:
        float: The maximum relative error over the checked coordinates.

    Raises:
        Config_Exception: If x is not stored at 64-bit precision or does not require gradients.
    """
    if x.dtype != VERIFICATION_DTYPE:
        raise Config_Exception(f"Gradient checks run at 64-bit precision but got {x.dtype}")
    if not x.requires_grad:
        raise Config_Exception("Gradient checks need a tensor that requires gradients")
    x.zero_grad()
    with Grad_Tape() as tape:
        loss = f(x)
    tape.backward(loss)
    assert x.grad is not None
    analytic = x.grad.reshape(-1).copy()

    flat = x.data.reshape(-1)
    if flat.size <= samples:
        coordinates = np.arange(flat.size)
    else:
        coordinates = np.random.default_rng(seed).choice(flat.size, size=samples, replace=False)
    worst = 0.0
    for i in coordinates:
        original = flat[i]
        flat[i] = original + h
        plus = f(x).item()
        flat[i] = original - h
        minus = f(x).item()
        flat[i] = original
        central = (plus - minus) / (2.0 * h)
        error = abs(analytic[i] - central) / max(abs(analytic[i]), abs(central), floor)
        worst = max(worst, float(error))
    return worst
