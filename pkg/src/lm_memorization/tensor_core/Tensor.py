"""Module containing the Tensor class, a dense numpy-backed array with an optional gradient accumulator."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import numpy as np
import numpy.typing as npt

if TYPE_CHECKING:
    from lm_memorization.tensor_core.Grad_Tape import Grad_Tape

TRAINING_DTYPE = np.float32
VERIFICATION_DTYPE = np.float64


class Tensor:
    """A dense array of real values that can take part in reverse-mode differentiation.

    The values of a Tensor are never modified by operations; operations produce new Tensors and, when a Grad_Tape is active and an input requires gradients, record a backward rule on the tape.
    The only in-place mutation is gradient accumulation during backward and parameter updates applied by the optimizer.

    Attributes:
        data (np.ndarray): The element values.
        requires_grad (bool): True if gradients flowing into this tensor are accumulated in grad.
        grad (np.ndarray | None): Same-shape gradient accumulator, present iff requires_grad.
        name (str | None): Optional diagnostic name used in numeric error messages.
    """

    def __init__(self, data: npt.ArrayLike, requires_grad: bool = False, dtype: npt.DTypeLike | None = None, name: str | None = None) -> None:
        """Initialize a Tensor.

        Args:
            data (npt.ArrayLike): The element values. Integer inputs are converted to the training precision unless a dtype is given.
            requires_grad (bool, optional): Whether to keep a gradient accumulator for this tensor. Defaults to False.
            dtype (npt.DTypeLike, optional): Element precision. Defaults to the dtype of floating point data, otherwise 32-bit.
            name (str, optional): Diagnostic name for this tensor. Defaults to None.
        """
        array = np.asarray(data)
        if dtype is None:
            dtype = array.dtype if np.issubdtype(array.dtype, np.floating) else TRAINING_DTYPE
        self.data: np.ndarray = np.ascontiguousarray(array, dtype=dtype)
        self.requires_grad: bool = requires_grad
        self.grad: np.ndarray | None = np.zeros_like(self.data) if requires_grad else None
        self.name: str | None = name

    @property
    def shape(self) -> tuple[int, ...]:
        """
        Returns:
            tuple[int, ...]: The extents of this tensor.
        """
        return tuple(self.data.shape)

    @property
    def dtype(self) -> np.dtype:
        """
        Returns:
            np.dtype: The element precision of this tensor.
        """
        return self.data.dtype

    @property
    def size(self) -> int:
        """
        Returns:
            int: The number of elements, the product of the shape extents.
        """
        return int(self.data.size)

    def item(self) -> float:
        """
        Returns:
            float: The value of a single-element tensor.
        """
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data.item())

    def numpy(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: A copy of the element values.
        """
        return self.data.copy()

    def zero_grad(self) -> None:
        """Reset the gradient accumulator to zeros if this tensor requires gradients."""
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def accumulate_grad(self, gradient: np.ndarray) -> None:
        """Add the given gradient contribution to this tensor's accumulator.

        Args:
            gradient (np.ndarray): A gradient with the same shape as this tensor.
        """
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += gradient.astype(self.data.dtype, copy=False)

    def astype(self, dtype: npt.DTypeLike) -> Tensor:
        """
        Args:
            dtype (npt.DTypeLike): The precision of the copy.

        Returns:
            Tensor: A detached copy of this tensor at the given precision that keeps the requires_grad flag.
        """
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def detach(self) -> Tensor:
        """
        Returns:
            Tensor: A copy of this tensor's values with no gradient tracking.
        """
        return Tensor(self.data.copy(), requires_grad=False, name=self.name)

    def backward(self, tape: Grad_Tape) -> None:
        """Populate the gradients of every tensor that contributed to this scalar through the given tape.

        Args:
            tape (Grad_Tape): The tape that recorded the computation of this tensor.
        """
        tape.backward(self)

    def __add__(self, other: Any) -> Tensor:
        from lm_memorization.tensor_core.operations import add

        return add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        from lm_memorization.tensor_core.operations import add

        return add(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from lm_memorization.tensor_core.operations import mul

        return mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        from lm_memorization.tensor_core.operations import mul

        return mul(other, self)

    def __matmul__(self, other: Tensor) -> Tensor:
        from lm_memorization.tensor_core.operations import matmul

        return matmul(self, other)

    def __neg__(self) -> Tensor:
        from lm_memorization.tensor_core.operations import mul

        return mul(self, -1.0)

    def __sub__(self, other: Any) -> Tensor:
        from lm_memorization.tensor_core.operations import add, mul

        return add(self, mul(other, -1.0))

    def __repr__(self) -> str:
        label = f"{self.name}: " if self.name is not None else ""
        return f"Tensor({label}shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"
