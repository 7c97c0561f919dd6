"""Durability plumbing for the service and CLI.

Layout inside a data directory:

    snapshot.jsonl        graph snapshot (authoritative at last compaction)
    deviations.wal.jsonl  graph records created per deviation since then
    feedback.jsonl        append-only feedback records
    embeddings.jsonl      embedding cache
    synonyms.csv          active synonym map

Feedback appends and WAL appends are fsynced before the request is
acknowledged, so every acknowledged write survives a crash; a torn final
line (the write that was in flight) is dropped on replay.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass

from .graph import Graph


@dataclass
class DataPaths:
    root: str

    @property
    def snapshot(self) -> str:
        return os.path.join(self.root, "snapshot.jsonl")

    @property
    def deviations_wal(self) -> str:
        return os.path.join(self.root, "deviations.wal.jsonl")

    @property
    def feedback(self) -> str:
        return os.path.join(self.root, "feedback.jsonl")

    @property
    def embeddings(self) -> str:
        return os.path.join(self.root, "embeddings.jsonl")

    @property
    def synonyms(self) -> str:
        return os.path.join(self.root, "synonyms.csv")

    def ensure(self) -> "DataPaths":
        os.makedirs(self.root, exist_ok=True)
        return self


def _read_jsonl_tolerant(path: str) -> list[dict]:
    """All complete JSON records in an append-only file.

    Only the final line may be torn (crash mid-append); it is dropped.
    A corrupt line anywhere else raises ValueError with the line number.
    """
    if not os.path.exists(path):
        return []
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text:
        return []
    torn_tail = not text.endswith("\n")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    records = []
    for idx, line in enumerate(lines):
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except ValueError:
            if torn_tail and idx == len(lines) - 1:
                break
            raise ValueError(f"{path}:{idx + 1}: corrupt record") from None
    return records


class AppendLog:
    """Append-only JSONL with fsync-per-record durability."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._fh = None

    def replay(self) -> list[dict]:
        return _read_jsonl_tolerant(self.path)

    def append(self, record: dict) -> None:
        with self._lock:
            if self._fh is None:
                self._repair_tail()
                self._fh = open(self.path, "a", encoding="utf-8")
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def _repair_tail(self) -> None:
        # if the previous process died mid-append, drop the torn bytes so
        # the next record starts on a clean line
        if not os.path.exists(self.path):
            return
        with open(self.path, "rb") as fh:
            data = fh.read()
        if not data or data.endswith(b"\n"):
            return
        cut = data.rfind(b"\n") + 1  # 0 when no newline at all
        tail = data[cut:]
        try:
            json.loads(tail.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            with open(self.path, "r+b") as fh:
                fh.truncate(cut)
            return
        with open(self.path, "ab") as fh:
            fh.write(b"\n")

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


class FeedbackLog(AppendLog):
    """Feedback records with monotone per-writer sequence/timestamps."""

    def __init__(self, path: str):
        super().__init__(path)
        self._seq = 0
        for record in self.replay():
            seq = record.get("seq", 0)
            if isinstance(seq, int) and seq > self._seq:
                self._seq = seq

    def next_id(self) -> tuple[int, str]:
        with self._lock:
            self._seq += 1
            return self._seq, f"fb-{self._seq:08d}"


def load_graph(paths: DataPaths) -> Graph:
    """Snapshot plus replayed deviation WAL; empty graph when neither exists."""
    if os.path.exists(paths.snapshot):
        graph = Graph.snapshot_load(paths.snapshot)
    else:
        graph = Graph()
    for entry in _read_jsonl_tolerant(paths.deviations_wal):
        for record in entry.get("records", []):
            graph.insert_record(record)
    return graph


def compact(graph: Graph, paths: DataPaths) -> int:
    """Write a fresh snapshot and truncate the deviation WAL it subsumes."""
    count = graph.snapshot_save(paths.snapshot)
    if os.path.exists(paths.deviations_wal):
        os.remove(paths.deviations_wal)
    return count


class RWLock:
    """Writer-preferring reader-writer lock for the in-memory graph."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._writers_waiting = 0

    def acquire_read(self) -> None:
        with self._cond:
            while self._writer or self._writers_waiting:
                self._cond.wait()
            self._readers += 1

    def release_read(self) -> None:
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_write(self) -> None:
        with self._cond:
            self._writers_waiting += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._writers_waiting -= 1
            self._writer = True

    def release_write(self) -> None:
        with self._cond:
            self._writer = False
            self._cond.notify_all()

    class _Guard:
        def __init__(self, lock: "RWLock", write: bool):
            self._lock = lock
            self._write = write

        def __enter__(self):
            if self._write:
                self._lock.acquire_write()
            else:
                self._lock.acquire_read()

        def __exit__(self, *exc):
            if self._write:
                self._lock.release_write()
            else:
                self._lock.release_read()
            return False

    def reading(self) -> "_Guard":
        return self._Guard(self, write=False)

    def writing(self) -> "_Guard":
        return self._Guard(self, write=True)
