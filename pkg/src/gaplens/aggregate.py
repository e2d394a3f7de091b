"""Class-wide knowledge-gap frequency aggregation.

Counts are per-session-distinct: a student repeatedly confused about the
same KC contributes one to that KC's count. Re-recording a session (after
an amended re-analysis) replaces its prior contribution, so the live state
always equals a fold of the latest report per session. Raw occurrence
counts are kept in diagnostics for anyone who wants the other reading.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

from .analysis import SessionReport
from .errors import StaleRegistry

Window = tuple[float | None, float | None]


@dataclass(frozen=True)
class FrequencyEntry:
    kc_id: str
    count: int
    sample_misconceptions: tuple[str, ...] = ()


@dataclass
class FrequencyReport:
    course_id: str
    registry_version: str
    window: Window
    entries: list[FrequencyEntry]
    sessions_counted: int

    def to_dict(self) -> dict:
        return {
            "course_id": self.course_id,
            "registry_version": self.registry_version,
            "window": {"start": self.window[0], "end": self.window[1]},
            "entries": [
                {
                    "kc_id": e.kc_id,
                    "count": e.count,
                    "sample_misconceptions": list(e.sample_misconceptions),
                }
                for e in self.entries
            ],
            "sessions_counted": self.sessions_counted,
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(["kc_id", "count"])
        for entry in self.entries:
            writer.writerow([entry.kc_id, entry.count])
        return buffer.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class _Contribution:
    kc_ids: set[str]
    misconceptions: dict[str, list[str]]
    occurrences: dict[str, int]
    recorded_at: float


def _contribution_from_report(report: SessionReport, recorded_at: float) -> _Contribution:
    misconceptions: dict[str, list[str]] = {}
    occurrences: dict[str, int] = {}
    for finding in report.findings:
        if finding.verdict != "gap" or finding.kc_id is None:
            continue
        occurrences[finding.kc_id] = occurrences.get(finding.kc_id, 0) + 1
        texts = misconceptions.setdefault(finding.kc_id, [])
        if finding.misconception and finding.misconception not in texts:
            texts.append(finding.misconception)
    return _Contribution(
        kc_ids=set(report.distinct_kcs),
        misconceptions=misconceptions,
        occurrences=occurrences,
        recorded_at=recorded_at,
    )


class GapAggregator:
    """Frequency table over the latest analyzed report of each session."""

    def __init__(self, course_id: str, registry_version: str):
        self.course_id = course_id
        self.registry_version = registry_version
        self._sessions: dict[str, _Contribution] = {}
        self.diagnostics: dict = {"stale_registry": 0, "quarantined_sessions": []}

    def record(self, report: SessionReport, recorded_at: float | None = None) -> None:
        """Fold one analyzed session report into the table (idempotent upsert).

        Reports carrying a different registry version are quarantined (their
        counts would not be comparable) and StaleRegistry is raised.
        """
        if report.status != "analyzed":
            raise ValueError(f"only analyzed reports are recorded, got {report.status!r}")
        if report.registry_version != self.registry_version:
            self.diagnostics["stale_registry"] += 1
            if report.session_id not in self.diagnostics["quarantined_sessions"]:
                self.diagnostics["quarantined_sessions"].append(report.session_id)
            raise StaleRegistry(report.registry_version, self.registry_version)
        ts = time.time() if recorded_at is None else recorded_at
        self._sessions[report.session_id] = _contribution_from_report(report, ts)

    def _window_sessions(self, window: Window | None) -> list[tuple[str, _Contribution]]:
        items = sorted(self._sessions.items())
        if window is None:
            return items
        start, end = window
        return [
            (sid, contribution)
            for sid, contribution in items
            if (start is None or contribution.recorded_at >= start)
            and (end is None or contribution.recorded_at <= end)
        ]

    def distribution(self, window: Window | None = None) -> dict[str, int]:
        """Full kc_id -> per-session-distinct count table."""
        counts: dict[str, int] = {}
        for _, contribution in self._window_sessions(window):
            for kc_id in contribution.kc_ids:
                counts[kc_id] = counts.get(kc_id, 0) + 1
        return counts

    def occurrence_counts(self, window: Window | None = None) -> dict[str, int]:
        """Diagnostic view: every gap finding counts, not just one per session."""
        counts: dict[str, int] = {}
        for _, contribution in self._window_sessions(window):
            for kc_id, n in contribution.occurrences.items():
                counts[kc_id] = counts.get(kc_id, 0) + n
        return counts

    def top_n(self, n: int, window: Window | None = None) -> FrequencyReport:
        """Ranked report: count descending, ties by lexicographic kc_id."""
        if n < 1:
            raise ValueError("n must be >= 1")
        sessions = self._window_sessions(window)
        counts: dict[str, int] = {}
        for _, contribution in sessions:
            for kc_id in contribution.kc_ids:
                counts[kc_id] = counts.get(kc_id, 0) + 1
        ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
        entries = []
        for kc_id, count in ranked[:n]:
            samples: list[str] = []
            for _, contribution in sessions:
                for text in contribution.misconceptions.get(kc_id, []):
                    if text not in samples:
                        samples.append(text)
                    if len(samples) == 3:
                        break
                if len(samples) == 3:
                    break
            entries.append(
                FrequencyEntry(kc_id=kc_id, count=count, sample_misconceptions=tuple(samples))
            )
        return FrequencyReport(
            course_id=self.course_id,
            registry_version=self.registry_version,
            window=window if window is not None else (None, None),
            entries=entries,
            sessions_counted=len(sessions),
        )

    def sessions_recorded(self) -> int:
        return len(self._sessions)
