"""Append-only newline-delimited JSON event log.

The service persists everything that matters as events so that state can be
rebuilt deterministically after a restart. Four kinds exist; replay folds
them in order. A line that cannot be decoded halts replay with CorruptEvent
at that seq (serve can opt to drop a torn final line after a crash).
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import CorruptEvent

EVENT_KINDS = (
    "session_created",
    "message_appended",
    "report_stored",
    "aggregate_recorded",
)


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    payload: dict
    ts: float

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "kind": self.kind, "payload": self.payload, "ts": self.ts},
            ensure_ascii=False,
        )


class EventLog:
    """Single-writer append-only log; seq starts at 1 and is dense."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._seq = 0
        if self.path.exists():
            existing = read_events(self.path, allow_partial_tail=True)
            if existing:
                self._seq = existing[-1].seq

    @property
    def last_seq(self) -> int:
        return self._seq

    def append(self, kind: str, payload: dict, ts: float | None = None) -> Event:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        with self._lock:
            self._seq += 1
            event = Event(
                seq=self._seq,
                kind=kind,
                payload=payload,
                ts=time.time() if ts is None else ts,
            )
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(event.to_json() + "\n")
                fh.flush()
            return event


def read_events(path: str | Path, allow_partial_tail: bool = False) -> list[Event]:
    """Decode the log strictly: any undecodable or out-of-order line raises
    CorruptEvent at the seq it would have occupied.

    allow_partial_tail tolerates exactly one torn line at the very end of
    the file (the signature of a crash mid-append) by dropping it.
    """
    path = Path(path)
    if not path.exists():
        return []
    events: list[Event] = []
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for position, line in enumerate(lines):
        expected_seq = events[-1].seq + 1 if events else 1
        is_last = position == len(lines) - 1
        try:
            record = json.loads(line)
            event = Event(
                seq=int(record["seq"]),
                kind=str(record["kind"]),
                payload=record["payload"],
                ts=float(record["ts"]),
            )
            if event.kind not in EVENT_KINDS:
                raise ValueError(f"unknown kind {event.kind!r}")
            if event.seq <= (events[-1].seq if events else 0):
                raise ValueError(f"seq {event.seq} not increasing")
        except (ValueError, KeyError, TypeError) as exc:
            if allow_partial_tail and is_last:
                break
            raise CorruptEvent(expected_seq, str(exc)) from exc
        events.append(event)
    return events
