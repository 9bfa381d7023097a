"""Module containing the Model_State class: a transformer configuration together with all of its learnable parameters.

The block ordering is pre-layer-norm. Dropout is permanently disabled, so forward passes are deterministic functions of parameters and inputs.
"""

from __future__ import annotations

import math
from collections.abc import Iterator

import numpy as np
import numpy.typing as npt

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception, Input_Exception
from lm_memorization.tensor_core.operations import add, embedding, gelu, layer_norm, matmul, mul, reshape, softmax, transpose
from lm_memorization.tensor_core.Tensor import TRAINING_DTYPE, Tensor
from lm_memorization.transformer_lm.Transformer_Config import LM_Task, Transformer_Config

INIT_STD = 0.02


def parameter_shapes(config: Transformer_Config) -> dict[str, tuple[int, ...]]:
    """
    Args:
        config (Transformer_Config): The architecture.

    Returns:
        dict[str, tuple[int, ...]]: The name and shape of every learnable parameter, in initialization order.
    """
    d, f = config.d_model, config.d_ffn
    shapes: dict[str, tuple[int, ...]] = {"token_embedding.weight": (config.vocab_size, d)}
    if config.positional_embeddings:
        shapes["position_embedding.weight"] = (config.max_seq_len, d)
    for layer in range(config.n_layers):
        prefix = f"layers.{layer}"
        shapes[f"{prefix}.ln_1.gain"] = (d,)
        shapes[f"{prefix}.ln_1.bias"] = (d,)
        for projection in ("query", "key", "value", "out"):
            shapes[f"{prefix}.attention.{projection}.weight"] = (d, d)
            shapes[f"{prefix}.attention.{projection}.bias"] = (d,)
        shapes[f"{prefix}.ln_2.gain"] = (d,)
        shapes[f"{prefix}.ln_2.bias"] = (d,)
        shapes[f"{prefix}.ffn.in.weight"] = (d, f)
        shapes[f"{prefix}.ffn.in.bias"] = (f,)
        shapes[f"{prefix}.ffn.out.weight"] = (f, d)
        shapes[f"{prefix}.ffn.out.bias"] = (d,)
    if config.has_final_layer_norm:
        shapes["ln_f.gain"] = (d,)
        shapes["ln_f.bias"] = (d,)
    if not config.tie_embeddings:
        shapes["output.weight"] = (d, config.vocab_size)
    return shapes


class Model_State:
    """A language model f: its configuration and named parameter tensors.

    Attributes:
        config (Transformer_Config): The architecture of the model.
        parameters (dict[str, Tensor]): Named learnable parameters in initialization order. Every shape is determined by the configuration.
        seed (int): The seed the parameters were initialized from.
    """

    def __init__(self, config: Transformer_Config, parameters: dict[str, Tensor], seed: int) -> None:
        self.config: Transformer_Config = config
        self.parameters: dict[str, Tensor] = parameters
        self.seed: int = seed
        expected = parameter_shapes(config)
        if list(expected) != list(parameters) or any(parameters[n].shape != s for n, s in expected.items()):
            raise Config_Exception(f"Parameters do not match the configuration {config.canonical_json()}")

    @property
    def dtype(self) -> np.dtype:
        """
        Returns:
            np.dtype: The precision of the parameters.
        """
        return next(iter(self.parameters.values())).dtype

    def __getitem__(self, name: str) -> Tensor:
        return self.parameters[name]

    def __iter__(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self.parameters.items())

    def zero_grad(self) -> None:
        """Reset the gradient accumulator of every parameter."""
        for tensor in self.parameters.values():
            tensor.zero_grad()

    def astype(self, dtype: npt.DTypeLike) -> Model_State:
        """
        Args:
            dtype (npt.DTypeLike): The precision of the copy.

        Returns:
            Model_State: A copy of this model with every parameter converted to the given precision.
        """
        return Model_State(self.config, {name: tensor.astype(dtype) for name, tensor in self.parameters.items()}, self.seed)

    def copy(self) -> Model_State:
        """
        Returns:
            Model_State: A deep copy of this model's parameters.
        """
        return Model_State(self.config, {name: Tensor(t.data.copy(), requires_grad=t.requires_grad, name=name) for name, t in self.parameters.items()}, self.seed)


def build_model(config: Transformer_Config, seed: int, dtype: npt.DTypeLike = TRAINING_DTYPE) -> Model_State:
    """Initialize a model from a seeded normal(0, 0.02) draw.

    Weight matrices and embeddings are drawn in parameter order from one generator; layer-norm gains are 1 and all biases are 0.

    Args:
        config (Transformer_Config): The architecture.
        seed (int): The initialization seed.
        dtype (npt.DTypeLike, optional): Parameter precision. Defaults to 32-bit.

    Returns:
        Model_State: The initialized model.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    parameters: dict[str, Tensor] = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".gain"):
            values = np.ones(shape)
        elif name.endswith(".bias"):
            values = np.zeros(shape)
        else:
            values = rng.normal(0.0, INIT_STD, size=shape)
        parameters[name] = Tensor(values, requires_grad=True, dtype=dtype, name=name)
    return Model_State(config, parameters, seed)


def attention_mask(task: LM_Task, seq_len: int, key_mask: np.ndarray | None = None) -> np.ndarray:
    """
    Args:
        task (LM_Task): The objective; causal attention is strictly lower-triangular including the diagonal.
        seq_len (int): The sequence length T.
        key_mask (np.ndarray, optional): A (batch, T) boolean array that is False on padding positions. Defaults to no padding.

    Returns:
        np.ndarray: A boolean array broadcastable to (batch, heads, T, T) where True marks an allowed query/key pair.
    """
    allowed = np.tril(np.ones((seq_len, seq_len), dtype=bool)) if task is LM_Task.causal else np.ones((seq_len, seq_len), dtype=bool)
    allowed = allowed[None, None, :, :]
    if key_mask is not None:
        allowed = allowed & np.asarray(key_mask, dtype=bool)[:, None, None, :]
    return allowed


def _linear(model: Model_State, x: Tensor, prefix: str) -> Tensor:
    return add(matmul(x, model[f"{prefix}.weight"]), model[f"{prefix}.bias"])


def _attention(model: Model_State, x: Tensor, prefix: str, allowed: np.ndarray) -> Tensor:
    config = model.config
    batch, seq_len, _ = x.shape
    heads, width = config.n_heads, config.head_width

    def _split(projection: str) -> Tensor:
        projected = _linear(model, x, f"{prefix}.{projection}")
        return transpose(reshape(projected, (batch, seq_len, heads, width)), (0, 2, 1, 3))

    query, key, value = _split("query"), _split("key"), _split("value")
    scores = mul(matmul(query, transpose(key, (0, 1, 3, 2))), 1.0 / math.sqrt(width))
    weights = softmax(scores, axis=-1, mask=allowed)
    merged = reshape(transpose(matmul(weights, value), (0, 2, 1, 3)), (batch, seq_len, config.d_model))
    return _linear(model, merged, f"{prefix}.out")


def forward(model: Model_State, batch: npt.ArrayLike, task: LM_Task | None = None, key_mask: np.ndarray | None = None) -> Tensor:
    """Teacher-forced logits for every position of a batch of token sequences.

    Args:
        model (Model_State): The model f.
        batch (npt.ArrayLike): A (batch, T) integer array of token ids. For the masked task the ids already carry the mask token at masked positions.
        task (LM_Task, optional): Attention pattern to use. Defaults to the model's configured task.
        key_mask (np.ndarray, optional): A (batch, T) boolean array that is False on padding positions. Defaults to no padding.

    Returns:
        Tensor: Logits with shape (batch, T, V).

    Raises:
        Input_Exception: If the batch is longer than max_seq_len, not two dimensional, or holds ids outside [0, V).
    """
    config = model.config
    task = config.task if task is None else task
    ids = np.asarray(batch, dtype=np.int64)
    if ids.ndim != 2:
        raise Input_Exception("Model input must be a (batch, sequence) matrix", ids.shape)
    seq_len = ids.shape[1]
    if seq_len > config.max_seq_len:
        raise Input_Exception(f"Sequence longer than max_seq_len {config.max_seq_len}", ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise Input_Exception(f"Token ids must lie in [0, {config.vocab_size})", ids.shape)

    hidden = embedding(model["token_embedding.weight"], ids)
    if config.positional_embeddings:
        hidden = add(hidden, embedding(model["position_embedding.weight"], np.arange(seq_len)))
    allowed = attention_mask(task, seq_len, key_mask)
    for layer in range(config.n_layers):
        prefix = f"layers.{layer}"
        normed = layer_norm(hidden, model[f"{prefix}.ln_1.gain"], model[f"{prefix}.ln_1.bias"])
        hidden = add(hidden, _attention(model, normed, f"{prefix}.attention", allowed))
        normed = layer_norm(hidden, model[f"{prefix}.ln_2.gain"], model[f"{prefix}.ln_2.bias"])
        expanded = gelu(_linear(model, normed, f"{prefix}.ffn.in"))
        hidden = add(hidden, _linear(model, expanded, f"{prefix}.ffn.out"))
    if config.has_final_layer_norm:
        hidden = layer_norm(hidden, model["ln_f.gain"], model["ln_f.bias"])
    if config.tie_embeddings:
        return matmul(hidden, transpose(model["token_embedding.weight"], (1, 0)))
    return matmul(hidden, model["output.weight"])
