"""Reading and writing model checkpoints.

A checkpoint file is laid out as:

* the 8-byte magic ``LMMCKPT\\0``,
* a little-endian uint32 giving the length of the header,
* a canonical JSON header (format version, model configuration, seed, counters, optimizer scalars and a blob table),
* the named blobs, each a contiguous little-endian 32-bit float array with its own crc32 in the blob table.

Model parameters and Adam moment tensors are stored as blobs so that a resumed run continues exactly where it stopped.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Checkpoint_Exception
from lm_memorization.optimizer_schedule.Adam_State import Adam_State
from lm_memorization.tensor_core.Tensor import Tensor
from lm_memorization.transformer_lm.Model_State import Model_State
from lm_memorization.transformer_lm.Transformer_Config import Transformer_Config

CHECKPOINT_MAGIC = b"LMMCKPT\x00"
CHECKPOINT_FORMAT_VERSION = 1
_BLOB_DTYPE = np.dtype("<f4")
_FIRST_MOMENT = "adam.first."
_SECOND_MOMENT = "adam.second."


@dataclass
class Training_Counters:
    """Progress counters saved with a checkpoint.

    Attributes:
        epoch (int): Completed epochs.
        update (int): Completed optimizer updates.
        tokens_processed (int): Tokens trained on so far, special-batch passes included.
        schedule_offset_tokens (float): Schedule position at which the active learning-rate schedule started.
        special_tokens (int): Tokens of special-batch passes; they do not advance the learning-rate schedule.
        phase (str): Name of the training phase the checkpoint was taken in.
    """

    epoch: int = 0
    update: int = 0
    tokens_processed: int = 0
    schedule_offset_tokens: float = 0.0
    phase: str = "train"
    special_tokens: int = 0

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> Training_Counters:
        return cls(**values)


def _blob_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype=_BLOB_DTYPE).tobytes()


def save_checkpoint(path: str | Path, model: Model_State, counters: Training_Counters, optimizer: Adam_State | None = None) -> Path:
    """Write a checkpoint atomically: the file is written beside its destination and renamed into place.

    Args:
        path (str | Path): Destination file.
        model (Model_State): The model to save.
        counters (Training_Counters): Progress counters to save.
        optimizer (Adam_State, optional): Optimizer state to save. Defaults to saving none.

    Returns:
        Path: The written checkpoint path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blobs: list[tuple[str, np.ndarray]] = [(name, tensor.data) for name, tensor in model]
    if optimizer is not None:
        blobs += [(_FIRST_MOMENT + name, moment) for name, moment in optimizer.first_moments.items()]
        blobs += [(_SECOND_MOMENT + name, moment) for name, moment in optimizer.second_moments.items()]
    table: list[dict[str, Any]] = []
    payloads: list[bytes] = []
    offset = 0
    for name, array in blobs:
        payload = _blob_bytes(array)
        table.append({"name": name, "shape": list(array.shape), "offset": offset, "nbytes": len(payload), "crc32": zlib.crc32(payload)})
        payloads.append(payload)
        offset += len(payload)
    header: dict[str, Any] = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "dtype": "<f4",
        "counters": asdict(counters),
        "blobs": table,
        "adam": None if optimizer is None else {"step": optimizer.step, "beta1": optimizer.beta1, "beta2": optimizer.beta2, "eps": optimizer.eps},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    partial = path.with_name(path.name + ".tmp")
    with open(partial, "wb") as checkpoint_file:
        checkpoint_file.write(CHECKPOINT_MAGIC)
        checkpoint_file.write(struct.pack("<I", len(header_bytes)))
        checkpoint_file.write(header_bytes)
        for payload in payloads:
            checkpoint_file.write(payload)
        checkpoint_file.flush()
        os.fsync(checkpoint_file.fileno())
    os.replace(partial, path)
    return path


def load_checkpoint(path: str | Path) -> tuple[Model_State, Training_Counters, Adam_State | None]:
    """
    Args:
        path (str | Path): A checkpoint written by save_checkpoint.

    Returns:
        tuple[Model_State, Training_Counters, Adam_State | None]: The model with 32-bit parameters requiring gradients, the counters, and the optimizer state if one was saved.

    Raises:
        Checkpoint_Exception: If the file is missing, has the wrong magic or format version, is truncated, or a blob fails its checksum.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as error:
        raise Checkpoint_Exception(str(path), str(error)) from error
    prefix = len(CHECKPOINT_MAGIC) + 4
    if len(raw) < prefix or raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise Checkpoint_Exception(str(path), "not a checkpoint file")
    (header_length,) = struct.unpack("<I", raw[len(CHECKPOINT_MAGIC) : prefix])
    try:
        header = json.loads(raw[prefix : prefix + header_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        raise Checkpoint_Exception(str(path), f"unreadable header ({error})") from error
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise Checkpoint_Exception(str(path), f"unsupported format version {header.get('format_version')}")
    body = raw[prefix + header_length :]
    arrays: dict[str, np.ndarray] = {}
    for entry in header["blobs"]:
        payload = body[entry["offset"] : entry["offset"] + entry["nbytes"]]
        if len(payload) != entry["nbytes"]:
            raise Checkpoint_Exception(str(path), f"blob {entry['name']} is truncated")
        if zlib.crc32(payload) != entry["crc32"]:
            raise Checkpoint_Exception(str(path), f"blob {entry['name']} fails its checksum")
        arrays[entry["name"]] = np.frombuffer(payload, dtype=_BLOB_DTYPE).reshape(entry["shape"]).astype(np.float32)
    config = Transformer_Config.from_dict(header["config"])
    parameters = {
        name: Tensor(array, requires_grad=True, name=name) for name, array in arrays.items() if not name.startswith((_FIRST_MOMENT, _SECOND_MOMENT))
    }
    model = Model_State(config, parameters, int(header["seed"]))
    optimizer: Adam_State | None = None
    if header.get("adam") is not None:
        adam = header["adam"]
        optimizer = Adam_State(
            first_moments={name: arrays[_FIRST_MOMENT + name].copy() for name in parameters},
            second_moments={name: arrays[_SECOND_MOMENT + name].copy() for name in parameters},
            step=int(adam["step"]),
            beta1=float(adam["beta1"]),
            beta2=float(adam["beta2"]),
            eps=float(adam["eps"]),
        )
    return model, Training_Counters.from_dict(header["counters"]), optimizer
