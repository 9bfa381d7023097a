"""The append-only JSONL metric log of a run.

Each line is one canonical JSON record. A run that finishes appends a completion record holding the sha256 of every preceding byte, so aggregators can tell complete logs from partial ones.
Appends are flushed and synced; a failed append truncates the file back to its last complete record.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from lm_memorization.lm_memorization_exceptions.experiment_exceptions import Log_Write_Exception
from lm_memorization.memorization_metrics.Memorization_History import Epoch_Record, Memorization_History, Update_Record
from lm_memorization.memorization_metrics.memory_units import Memory_Unit_Stats
from lm_memorization.memorization_metrics.pos_metrics import Pos_Memorization_Record

METRICS_FILE = "metrics.jsonl"
EPOCH_KIND = "epoch"
UPDATE_KIND = "update"
INJECTION_KIND = "injection"
COMPLETE_KIND = "complete"
RECORD_FIELDS: tuple[str, ...] = ("run_id", "kind", "index", "M", "ppl_val", "per_pos", "mean_L", "tokens_processed", "wall_time")


def encode_record(record: dict[str, Any]) -> bytes:
    return (json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def make_record(run_id: str, kind: str, index: int, tokens_processed: int, wall_time: float | None = None, **values: Any) -> dict[str, Any]:
    """
    Args:
        run_id (str): The run the record belongs to.
        kind (str): "epoch", "update" or "injection".
        index (int): The epoch or update index.
        tokens_processed (int): Tokens trained on so far.
        wall_time (float, optional): Wall-clock timestamp, if recorded. Defaults to None.
        **values (Any): Further fields; the schema fields not given are null.

    Returns:
        dict[str, Any]: A record with every schema field present.
    """
    record: dict[str, Any] = dict.fromkeys(RECORD_FIELDS)
    record.update({"run_id": run_id, "kind": kind, "index": index, "tokens_processed": tokens_processed, "wall_time": wall_time})
    record.update(values)
    return record


class Metric_Log:
    """Writer of a run's metrics.jsonl."""

    def __init__(self, path: str | Path) -> None:
        self.path: Path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)

    def append(self, record: dict[str, Any]) -> None:
        """
        Args:
            record (dict[str, Any]): The record to append.

        Raises:
            Log_Write_Exception: If writing fails. The file is truncated back to its size before the append.
        """
        payload = encode_record(record)
        size = self.path.stat().st_size
        try:
            with open(self.path, "ab") as log_file:
                log_file.write(payload)
                log_file.flush()
                os.fsync(log_file.fileno())
        except OSError as error:
            try:
                os.truncate(self.path, size)
            except OSError:
                pass
            raise Log_Write_Exception(str(self.path), error) from error

    def complete(self, run_id: str, summary: dict[str, Any] | None = None) -> None:
        """Append the completion record.

        Args:
            run_id (str): The finished run.
            summary (dict[str, Any], optional): Extra fields for the completion record. Defaults to none.
        """
        body = self.path.read_bytes()
        record = {"run_id": run_id, "kind": COMPLETE_KIND, "records": body.count(b"\n"), "sha256": hashlib.sha256(body).hexdigest()}
        if summary:
            record["summary"] = summary
        self.append(record)

    def truncate_after(self, epoch: int, update: int) -> list[dict[str, Any]]:
        """Drop records past a checkpoint so a resumed run rewrites them.

        Args:
            epoch (int): The last epoch kept.
            update (int): The last update kept.

        Returns:
            list[dict[str, Any]]: The kept records.
        """
        kept = [
            record
            for record in read_records(self.path)
            if (record["kind"] == UPDATE_KIND and record["index"] <= update) or (record["kind"] in (EPOCH_KIND, INJECTION_KIND) and record["index"] <= epoch)
        ]
        partial = self.path.with_name(self.path.name + ".tmp")
        partial.write_bytes(b"".join(encode_record(record) for record in kept))
        os.replace(partial, self.path)
        return kept


def read_records(path: str | Path) -> list[dict[str, Any]]:
    """
    Args:
        path (str | Path): A metrics.jsonl file.

    Returns:
        list[dict[str, Any]]: Every complete record; a trailing partial line is ignored.
    """
    path = Path(path)
    if not path.exists():
        return []
    records = []
    for line in path.read_bytes().split(b"\n"):
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            break
    return records


def is_complete(path: str | Path) -> bool:
    """
    Args:
        path (str | Path): A metrics.jsonl file.

    Returns:
        bool: True if the log ends with a completion record whose checksum matches the preceding bytes.
    """
    path = Path(path)
    if not path.exists():
        return False
    body = path.read_bytes()
    lines = body.rstrip(b"\n").split(b"\n")
    if not lines or not lines[-1]:
        return False
    try:
        last = json.loads(lines[-1])
    except json.JSONDecodeError:
        return False
    if last.get("kind") != COMPLETE_KIND:
        return False
    preceding = body[: len(body) - len(lines[-1]) - 1]
    return bool(last.get("sha256") == hashlib.sha256(preceding).hexdigest())


def history_from_records(records: Iterable[dict[str, Any]], param_count: int = 0, config_hash: str = "") -> Memorization_History:
    """
    Args:
        records (Iterable[dict[str, Any]]): Metric log records of one run.
        param_count (int, optional): The model size N. Defaults to the value in the completion summary, if any.
        config_hash (str, optional): The run's configuration hash. Defaults to the value in the completion summary, if any.

    Returns:
        Memorization_History: The epoch and update series of the run.
    """
    records = list(records)
    run_id = records[0]["run_id"] if records else ""
    for record in records:
        if record["kind"] == COMPLETE_KIND and "summary" in record:
            param_count = param_count or int(record["summary"].get("param_count", 0))
            config_hash = config_hash or str(record["summary"].get("config_hash", ""))
    history = Memorization_History(run_id, param_count, config_hash)
    for record in records:
        if record["kind"] == EPOCH_KIND:
            history.add_epoch(epoch_record_from_log(record))
        elif record["kind"] == UPDATE_KIND:
            history.add_update(Update_Record(record["index"], record["M"], record.get("batch", 0), record.get("epoch", 0), record["tokens_processed"]))
        elif record["kind"] == COMPLETE_KIND and "summary" in record:
            history.epoch_budget = record["summary"].get("epoch_budget")
            history.update_budget = record["summary"].get("update_budget")
    return history


def epoch_record_to_log(run_id: str, record: Epoch_Record, wall_time: float | None = None) -> dict[str, Any]:
    """
    Args:
        run_id (str): The run.
        record (Epoch_Record): The epoch measurements.
        wall_time (float, optional): Wall-clock timestamp, if recorded. Defaults to None.

    Returns:
        dict[str, Any]: The metric log record.
    """
    units = record.memory_units
    return make_record(
        run_id,
        EPOCH_KIND,
        record.epoch,
        record.tokens_processed,
        wall_time,
        M=record.memorization,
        ppl_val=record.validation_perplexity,
        per_pos=None if record.pos_record is None else record.pos_record.to_dict(),
        pos_counts=None if record.pos_record is None else {str(tag): count for tag, count in record.pos_record.counts.items()},
        mean_L=None if units is None else units.mean_length,
        mean_L_tokens=None if units is None else units.token_weighted_length,
        run_count=None if units is None else units.run_count,
        run_histogram=None if units is None else units.to_dict()["histogram"],
        special_M=record.special_memorization,
        special_ppl=record.special_perplexity,
    )


def epoch_record_from_log(record: dict[str, Any]) -> Epoch_Record:
    """
    Args:
        record (dict[str, Any]): An epoch record of the metric log.

    Returns:
        Epoch_Record: The epoch measurements.
    """
    epoch = int(record["index"])
    pos = None if record.get("per_pos") is None else Pos_Memorization_Record.from_dict(epoch, record["per_pos"], record.get("pos_counts"))
    units = None
    if record.get("mean_L") is not None:
        histogram = {int(length): int(count) for length, count in (record.get("run_histogram") or {}).items()}
        units = Memory_Unit_Stats(epoch, float(record["mean_L"]), float(record.get("mean_L_tokens") or 0.0), int(record.get("run_count") or 0), histogram)
    return Epoch_Record(epoch, record["M"], record.get("ppl_val"), int(record["tokens_processed"]), pos, units, record.get("special_M"), record.get("special_ppl"))
