"""Append-only JSONL event journal.

One file per server start, named by the start timestamp. Every record is
a single JSON line flushed before the append returns, so the log can be
tailed and replayed. Serialization is canonical (sorted keys, compact
separators) to keep deterministic runs byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

EVENT_KINDS = ("telemetry", "detection", "command", "dialog", "error")


@dataclass(frozen=True)
class EventRecord:
    timestamp_ms: int
    kind: str
    body: dict

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


def record_to_line(r: EventRecord) -> str:
    return json.dumps(
        {"timestamp_ms": r.timestamp_ms, "kind": r.kind, "body": r.body},
        sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def record_from_line(line: str) -> EventRecord:
    obj = json.loads(line)
    return EventRecord(int(obj["timestamp_ms"]), obj["kind"], obj["body"])


class EventLog:
    """Append-only journal bound to one log file.

    A disk failure flips `healthy` instead of raising, so ingestion keeps
    running in memory while the operator sees the flag in the snapshot.
    """

    def __init__(self, log_dir, start_ms: int):
        self.dir = Path(log_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.path = self.dir / f"events-{start_ms}.jsonl"
        self.healthy = True
        self._last_ts = -1
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: EventRecord) -> None:
        # Wall clocks can step backwards; clamp so timestamps stay
        # non-decreasing within one log.
        ts = max(record.timestamp_ms, self._last_ts)
        if ts != record.timestamp_ms:
            record = EventRecord(ts, record.kind, record.body)
        self._last_ts = ts
        try:
            self._fh.write(record_to_line(record) + "\n")
            self._fh.flush()
        except (OSError, ValueError):  # ValueError: writing a closed file
            self.healthy = False

    def close(self) -> None:
        try:
            self._fh.close()
        except (OSError, ValueError):
            self.healthy = False


def read_records(path) -> list[EventRecord]:
    with open(path, encoding="utf-8") as fh:
        return [record_from_line(line) for line in fh if line.strip()]


def iter_lines_since(path, since_ms: int) -> Iterator[str]:
    """Raw JSONL lines with timestamp_ms strictly greater than since_ms."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if json.loads(line)["timestamp_ms"] > since_ms:
                yield line


def latest_log_file(log_dir) -> Path | None:
    files = sorted(Path(log_dir).glob("events-*.jsonl"))
    return files[-1] if files else None
