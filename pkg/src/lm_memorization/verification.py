"""The fast property suite behind ``verify``: gradient checks, schedule and optimizer contracts and the masking rate."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from lm_memorization.corpus_pipeline.mlm_masking import DEFAULT_MASK_PROBABILITY, apply_mlm_mask
from lm_memorization.corpus_pipeline.Packed_Sequence import Packed_Sequence
from lm_memorization.corpus_pipeline.Vocabulary import SPECIAL_TOKENS, Vocabulary
from lm_memorization.optimizer_schedule.Adam_State import Adam_State, adam_step
from lm_memorization.optimizer_schedule.Lr_Schedule import Lr_Schedule
from lm_memorization.tensor_core.gradient_check import finite_difference_check
from lm_memorization.tensor_core.operations import cross_entropy, embedding, gelu, layer_norm, matmul, mul, softmax, tensor_sum
from lm_memorization.tensor_core.Tensor import VERIFICATION_DTYPE, Tensor
from lm_memorization.transformer_lm.Model_State import build_model, forward
from lm_memorization.transformer_lm.Transformer_Config import LM_Task, Transformer_Config

GRADIENT_TOLERANCE = 1e-4
# The key bias has a zero gradient under softmax, so its central differences are pure rounding noise.
TRANSFORMER_GRADIENT_FLOOR = 1e-6
MASK_RATE_BOUNDS = (0.149, 0.151)
MASK_RATE_POSITIONS = 1_000_000


@dataclass(frozen=True)
class Property_Result:
    """
    Attributes:
        name (str): The property checked.
        passed (bool): Whether it held.
        detail (str): The measured value.
    """

    name: str
    passed: bool
    detail: str


def _tensor(shape: tuple[int, ...], seed: int) -> Tensor:
    return Tensor(np.random.default_rng(seed).normal(size=shape), requires_grad=True, dtype=VERIFICATION_DTYPE)


def _weighted_sum(output: Tensor, seed: int) -> Tensor:
    """A scalar that depends on every output coordinate with a distinct weight."""
    weights = np.random.default_rng(seed + 1000).normal(size=output.shape)
    return tensor_sum(mul(output, weights))


def operation_gradient_checks(inputs: int = 10) -> list[Property_Result]:
    """
    Args:
        inputs (int, optional): Random inputs drawn per operation. Defaults to 10.

    Returns:
        list[Property_Result]: The central-difference check of every differentiable operation at 64-bit precision.
    """
    mask = np.tril(np.ones((4, 4), dtype=bool))
    ignored = np.array([[False, True, False], [False, False, False]])
    results = []
    for name in ("add", "mul", "matmul", "gelu", "softmax", "layer_norm", "embedding", "cross_entropy"):
        worst = 0.0
        for draw in range(inputs):
            rng = np.random.default_rng([draw, len(name)])
            other = Tensor(rng.normal(size=(4, 3)), dtype=VERIFICATION_DTYPE)
            gain = Tensor(rng.normal(size=(5,)), dtype=VERIFICATION_DTYPE)
            bias = Tensor(rng.normal(size=(5,)), dtype=VERIFICATION_DTYPE)
            ids = rng.integers(0, 4, size=(2, 3))
            targets = rng.integers(0, 5, size=(2, 3))
            cases: dict[str, tuple[Callable[[Tensor], Tensor], tuple[int, ...]]] = {
                "add": (lambda x: _weighted_sum(x + other, draw), (4, 3)),
                "mul": (lambda x: _weighted_sum(x * other, draw), (4, 3)),
                "matmul": (lambda x: _weighted_sum(matmul(x, other), draw), (2, 4)),
                "gelu": (lambda x: _weighted_sum(gelu(x), draw), (3, 4)),
                "softmax": (lambda x: _weighted_sum(softmax(x, axis=-1, mask=mask), draw), (4, 4)),
                "layer_norm": (lambda x: _weighted_sum(layer_norm(x, gain, bias), draw), (3, 5)),
                "embedding": (lambda x: _weighted_sum(embedding(x, ids), draw), (4, 3)),
                "cross_entropy": (lambda x: cross_entropy(x, targets, ignore_mask=ignored), (2, 3, 5)),
            }
            function, shape = cases[name]
            worst = max(worst, finite_difference_check(function, _tensor(shape, 100 + draw), seed=draw))
        results.append(Property_Result(f"gradient of {name}", worst < GRADIENT_TOLERANCE, f"max relative error {worst:.2e} over {inputs} inputs"))
    return results


def transformer_gradient_check(task: LM_Task = LM_Task.causal, samples: int = 100) -> Property_Result:
    """
    Args:
        task (LM_Task, optional): The objective of the checked model. Defaults to causal.
        samples (int, optional): Coordinates checked per parameter; every coordinate of a smaller parameter. Defaults to 100.

    Returns:
        Property_Result: The worst central-difference error over every parameter of a 2-layer model's loss on a 4-token input.
    """
    config = Transformer_Config(n_layers=2, n_heads=2, d_model=8, vocab_size=16, max_seq_len=8, task=task)
    model = build_model(config, seed=0, dtype=VERIFICATION_DTYPE)
    rng = np.random.default_rng(0)
    ids = rng.integers(0, config.vocab_size, size=(2, 4))
    targets = rng.integers(0, config.vocab_size, size=(2, 4))
    worst = 0.0
    coordinates = 0
    for index, (_name, parameter) in enumerate(model):
        error = finite_difference_check(lambda _x: cross_entropy(forward(model, ids), targets), parameter, samples=samples, seed=index, floor=TRANSFORMER_GRADIENT_FLOOR)
        worst = max(worst, error)
        coordinates += min(samples, parameter.data.size)
    return Property_Result(f"gradient of the 2-layer {task} loss", worst < GRADIENT_TOLERANCE, f"max relative error {worst:.2e} over {coordinates} coordinates")


def schedule_contract() -> Property_Result:
    """
    Returns:
        Property_Result: Whether the schedule is exactly 0 at the start, max_lr at the end of warmup and 0 at the end of the run.
    """
    schedule = Lr_Schedule(max_lr=6e-4, warmup_tokens=1000.0, total_tokens=100_000.0)
    values = (schedule.lr_at(0), schedule.lr_at(schedule.warmup_tokens), schedule.lr_at(schedule.total_tokens))
    return Property_Result("schedule boundaries", values == (0.0, 6e-4, 0.0), f"lr at 0, W, T = {values}")


def adam_fixed_point() -> Property_Result:
    """
    Returns:
        Property_Result: Whether an Adam update with all-zero gradients from a fresh state leaves every parameter unchanged.
    """
    parameters = {"w": _tensor((3, 3), 0), "b": _tensor((3,), 1)}
    before = {name: tensor.data.copy() for name, tensor in parameters.items()}
    for tensor in parameters.values():
        tensor.zero_grad()
    adam_step(parameters, Adam_State.for_parameters(parameters), lr=1e-3)
    unchanged = all(np.array_equal(before[name], tensor.data) for name, tensor in parameters.items())
    return Property_Result("Adam zero-gradient fixed point", unchanged, "parameters unchanged" if unchanged else "parameters moved")


def mask_rate(p: float = DEFAULT_MASK_PROBABILITY, positions: int = MASK_RATE_POSITIONS, seed: int = 0) -> Property_Result:
    """
    Args:
        p (float, optional): Mask probability. Defaults to 0.15.
        positions (int, optional): Maskable positions drawn over. Defaults to one million.
        seed (int, optional): Mask seed. Defaults to 0.

    Returns:
        Property_Result: Whether the realised mask rate lies in [0.149, 0.151].
    """
    vocabulary = Vocabulary(SPECIAL_TOKENS + tuple(f"w{i}" for i in range(64)))
    length = 500
    rng = np.random.default_rng(seed)
    masked = 0
    for sequence_id in range(positions // length):
        ids = rng.integers(len(SPECIAL_TOKENS), len(vocabulary), size=length)
        sequence = Packed_Sequence(sequence_id, ids, sequence_id, (0,), np.arange(length, dtype=np.int64))
        layout = apply_mlm_mask(sequence, vocabulary, p, seed).mask_layout
        assert layout is not None
        masked += len(layout)
    rate = masked / (positions // length * length)
    low, high = MASK_RATE_BOUNDS
    return Property_Result("mask rate", low <= rate <= high, f"rate {rate:.5f} over {positions // length * length} positions")


def run_property_suite() -> list[Property_Result]:
    """
    Returns:
        list[Property_Result]: Every fast property, in a fixed order.
    """
    return [
        *operation_gradient_checks(),
        transformer_gradient_check(LM_Task.causal),
        transformer_gradient_check(LM_Task.masked),
        schedule_contract(),
        adam_fixed_point(),
        mask_rate(),
    ]
