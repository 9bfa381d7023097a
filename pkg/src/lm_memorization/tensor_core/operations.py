"""Differentiable tensor operations needed by a small transformer language model.

Every operation computes its forward value with numpy, rejects non-finite results, and, when a Grad_Tape is active and any operand requires gradients, records its backward rule on the tape.
Broadcasting is limited to what the transformer needs: trailing-axis bias vectors and leading batch axes.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
from scipy.special import erf

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Input_Exception, Numeric_Exception, Undefined_Loss_Exception
from lm_memorization.tensor_core.Grad_Tape import Backward_Rule, Grad_Tape
from lm_memorization.tensor_core.Tensor import Tensor

LAYER_NORM_EPS = 1e-5
_INV_SQRT_2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def as_tensor(value: Tensor | npt.ArrayLike, like: Tensor | None = None) -> Tensor:
    """
    Args:
        value (Tensor | npt.ArrayLike): A tensor or a constant.
        like (Tensor, optional): A tensor whose precision constants are converted to. Defaults to the training precision.

    Returns:
        Tensor: The value itself if it is a Tensor, otherwise a constant Tensor that does not require gradients.
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=None if like is None else like.dtype)


def _check_finite(name: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise Numeric_Exception(name)


def _result(name: str, data: np.ndarray, inputs: Sequence[Tensor], rule: Backward_Rule) -> Tensor:
    """Wrap a forward value as a Tensor and record it on the active tape when any operand requires gradients."""
    _check_finite(name, data)
    output = Tensor(data, dtype=data.dtype)
    tape = Grad_Tape.current()
    if tape is not None and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        tape.record(name, output, inputs, rule)
    return output


def _unbroadcast(gradient: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes that were broadcast to reach it from the given shape."""
    while gradient.ndim > len(shape):
        gradient = gradient.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and gradient.shape[axis] != 1:
            gradient = gradient.sum(axis=axis, keepdims=True)
    return gradient


def add(a: Tensor | npt.ArrayLike, b: Tensor | npt.ArrayLike) -> Tensor:
    """
    Args:
        a (Tensor | npt.ArrayLike): Left operand.
        b (Tensor | npt.ArrayLike): Right operand, broadcast against the left operand's trailing axes.

    Returns:
        Tensor: The elementwise sum.
    """
    a, b = as_tensor(a), as_tensor(b)
    a_shape, b_shape = a.shape, b.shape
    return _result("add", a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)))


def mul(a: Tensor | npt.ArrayLike, b: Tensor | npt.ArrayLike) -> Tensor:
    """
    Args:
        a (Tensor | npt.ArrayLike): Left operand.
        b (Tensor | npt.ArrayLike): Right operand, broadcast against the left operand.

    Returns:
        Tensor: The elementwise product.
    """
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    a_data, b_data = a.data, b.data
    return _result("mul", a_data * b_data, (a, b), lambda g: (_unbroadcast(g * b_data, a.shape), _unbroadcast(g * a_data, b.shape)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Args:
        a (Tensor): Left operand with shape (..., n, k).
        b (Tensor): Right operand with shape (..., k, m) or (k, m) shared across the batch axes.

    Returns:
        Tensor: The batched matrix product with shape (..., n, m).
    """
    a_data, b_data = a.data, b.data

    def _rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = np.matmul(g, np.swapaxes(b_data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a_data, -1, -2), g)
        return _unbroadcast(grad_a, a_data.shape), _unbroadcast(grad_b, b_data.shape)

    return _result("matmul", np.matmul(a_data, b_data), (a, b), _rule)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    """
    Args:
        a (Tensor): The tensor to reshape.
        shape (tuple[int, ...]): The new extents, with the same element count.

    Returns:
        Tensor: The reshaped tensor.
    """
    original = a.shape
    return _result("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(original),))


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    """
    Args:
        a (Tensor): The tensor to permute.
        axes (tuple[int, ...]): The permutation of the axes.

    Returns:
        Tensor: The permuted tensor.
    """
    inverse = tuple(int(i) for i in np.argsort(axes))
    return _result("transpose", np.ascontiguousarray(np.transpose(a.data, axes)), (a,), lambda g: (np.transpose(g, inverse),))


def tensor_sum(a: Tensor) -> Tensor:
    """
    Args:
        a (Tensor): The tensor to reduce.

    Returns:
        Tensor: A single-element tensor holding the sum of all elements.
    """
    shape = a.shape
    return _result("sum", np.asarray(a.data.sum(), dtype=a.dtype), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def embedding(weight: Tensor, ids: npt.ArrayLike) -> Tensor:
    """Gather rows of a weight matrix.

    Args:
        weight (Tensor): A (rows, width) table.
        ids (npt.ArrayLike): Integer row indices of any shape.

    Returns:
        Tensor: A tensor of shape ids.shape + (width,).
    """
    index = np.asarray(ids, dtype=np.int64)
    rows, width = weight.shape

    def _rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros((rows, width), dtype=g.dtype)
        np.add.at(grad, index.reshape(-1), g.reshape(-1, width))
        return (grad,)

    return _result("embedding", weight.data[index], (weight,), _rule)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit in its exact erf form, y = x * Phi(x).

    Args:
        x (Tensor): Finite input.

    Returns:
        Tensor: The elementwise activation.

    Raises:
        Numeric_Exception: If the input contains NaN or Inf.
    """
    _check_finite("gelu input", x.data)
    data = x.data
    cdf = 0.5 * (1.0 + erf(data * _INV_SQRT_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * data * data)
    return _result("gelu", (data * cdf).astype(data.dtype), (x,), lambda g: (g * (cdf + data * pdf),))


def softmax_array(data: np.ndarray, axis: int = -1, mask: np.ndarray | None = None) -> np.ndarray:
    """Numerically stable softmax on a raw array.

    Args:
        data (np.ndarray): The scores.
        axis (int, optional): The axis of each probability vector. Defaults to the last axis.
        mask (np.ndarray, optional): Boolean array broadcastable to data; False entries receive probability exactly 0. Defaults to no mask.

    Returns:
        np.ndarray: Probabilities summing to one along the axis.
    """
    if mask is not None:
        data = np.where(mask, data, -np.inf)
    shifted = data - np.max(data, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=axis, keepdims=True)


def log_softmax_array(data: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    Args:
        data (np.ndarray): The scores.
        axis (int, optional): The axis of each distribution. Defaults to the last axis.

    Returns:
        np.ndarray: Log-probabilities computed with max-subtraction.
    """
    shifted = data - np.max(data, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(x: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """
    Args:
        x (Tensor): The scores.
        axis (int, optional): The axis of each probability vector. Defaults to the last axis.
        mask (np.ndarray, optional): Boolean array broadcastable to x; False entries are excluded and receive probability 0. Every slice must keep at least one entry. Defaults to no mask.

    Returns:
        Tensor: Probabilities along the axis.

    Raises:
        Input_Exception: If the axis is not valid for the shape of x.
    """
    if not -x.data.ndim <= axis < x.data.ndim:
        raise Input_Exception(f"Softmax axis {axis} is invalid", x.shape)
    probs = softmax_array(x.data, axis, mask)

    def _rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (probs * (g - np.sum(g * probs, axis=axis, keepdims=True)),)

    return _result("softmax", probs, (x,), _rule)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each slice along the last axis to zero mean and unit population variance, then apply an affine transform.

    Args:
        x (Tensor): The input; the last axis is normalized.
        gain (Tensor): Per-feature scale with the extent of the last axis.
        bias (Tensor): Per-feature shift with the extent of the last axis.
        eps (float, optional): Variance floor. Defaults to 1e-5.

    Returns:
        Tensor: The normalized tensor.

    Raises:
        Input_Exception: If the normalized axis has fewer than two elements.
    """
    width = x.shape[-1]
    if width < 2:
        raise Input_Exception("Layer norm needs a normalized axis of at least 2", x.shape)
    data = x.data
    mean = data.mean(axis=-1, keepdims=True)
    centered = data - mean
    variance = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(variance + eps)
    normalized = centered * inv_std
    gain_data = gain.data

    def _rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        grad_normalized = g * gain_data
        grad_x = (inv_std / width) * (
            width * grad_normalized - grad_normalized.sum(axis=-1, keepdims=True) - normalized * np.sum(grad_normalized * normalized, axis=-1, keepdims=True)
        )
        reduce_axes = tuple(range(g.ndim - 1))
        return grad_x, np.sum(g * normalized, axis=reduce_axes), np.sum(g, axis=reduce_axes)

    return _result("layer_norm", (normalized * gain_data + bias.data).astype(data.dtype), (x, gain, bias), _rule)


def cross_entropy(logits: Tensor, targets: npt.ArrayLike, ignore_mask: npt.ArrayLike | None = None) -> Tensor:
    """Mean negative log-softmax probability of the target id over non-ignored positions.

    Args:
        logits (Tensor): Scores with shape (..., V).
        targets (npt.ArrayLike): Integer targets in [0, V) with the leading shape of logits.
        ignore_mask (npt.ArrayLike, optional): Boolean array with the leading shape of logits; True positions are excluded from the mean. Defaults to scoring every position.

    Returns:
        Tensor: A single-element loss tensor.

    Raises:
        Undefined_Loss_Exception: If every position is ignored.
        Input_Exception: If a target lies outside [0, V).
    """
    vocab = logits.shape[-1]
    flat_logits = logits.data.reshape(-1, vocab)
    flat_targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    kept = np.ones(flat_targets.shape, dtype=bool) if ignore_mask is None else ~np.asarray(ignore_mask, dtype=bool).reshape(-1)
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise Undefined_Loss_Exception()
    if np.any((flat_targets[kept] < 0) | (flat_targets[kept] >= vocab)):
        raise Input_Exception(f"Targets must lie in [0, {vocab})", logits.shape)
    safe_targets = np.where(kept, flat_targets, 0)
    log_probs = log_softmax_array(flat_logits)
    picked = log_probs[np.arange(flat_targets.size), safe_targets]
    loss = -np.sum(np.where(kept, picked, 0.0)) / n_kept

    def _rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.exp(log_probs)
        grad[np.arange(flat_targets.size), safe_targets] -= 1.0
        grad *= (kept / n_kept)[:, None]
        return ((grad * g).reshape(logits.shape),)

    return _result("cross_entropy", np.asarray(loss, dtype=logits.dtype), (logits,), _rule)
