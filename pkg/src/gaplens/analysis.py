"""Backend gap analysis.

For each (tutor turn, student response) pair the analyzer asks the model to
judge correctness and map any revealed gap onto the course KC registry,
then rolls per-turn findings up into a per-session report. Analysis never
touches the dialogue itself; it only reads finished turns, so tutoring and
gap identification stay decoupled.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field

from . import gateway
from .dialogue import DialogueSession, TurnPair, turn_pairs
from .errors import AnalysisFailed, SchemaViolation
from .gateway import ChatMessage, CompletionRequest, Provider
from .kc import KcRegistry, render_for_prompt

logger = logging.getLogger(__name__)

VERDICTS = ("gap", "correct", "insufficient_evidence")

ANALYSIS_TEMPERATURE = 0.2
ANALYSIS_MAX_TOKENS = 600
DEFAULT_MIN_EVIDENCE_CHARS = 40

# Wire schema for the model's structured reply. Field names are contractual;
# any violation routes through the gateway repair reprompt.
FINDING_LIST_SCHEMA: dict = {
    "type": "object",
    "required": ["findings"],
    "properties": {
        "findings": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["verdict"],
                "properties": {
                    "verdict": {"enum": list(VERDICTS)},
                    "kc_id": {"type": "string"},
                    "confidence": {"type": "number", "minimum": 0, "maximum": 1},
                    "misconception": {"type": "string", "minLength": 1},
                },
                "if": {"properties": {"verdict": {"const": "gap"}}},
                "then": {"required": ["kc_id", "confidence", "misconception"]},
            },
        }
    },
}

_ANALYST_PROMPT = """You are reviewing one exchange from a tutoring conversation in order to detect knowledge gaps. Judge whether the student's response reveals a misconception or missing understanding, and if so map it onto the course knowledge components listed below. Use only ids exactly as listed.

Knowledge components:
{kc_text}

Reply with ONLY a JSON object of this exact shape:
{{"findings": [{{"verdict": "gap" | "correct" | "insufficient_evidence", "kc_id": "...", "confidence": 0.0, "misconception": "..."}}]}}

Rules:
- Use verdict "gap" for each distinct gap the response reveals; include the kc_id, a confidence in [0, 1], and a one-sentence misconception description.
- Use verdict "correct" when the response shows sound understanding; omit kc_id, confidence, and misconception.
- Use verdict "insufficient_evidence" when the exchange is too thin to judge; omit the other fields.
- Several findings may be returned for one exchange."""


@dataclass(frozen=True)
class GapFinding:
    session_id: str
    turn_index: int
    verdict: str
    kc_id: str | None = None
    confidence: float | None = None
    misconception: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        is_gap = self.verdict == "gap"
        if is_gap and (self.kc_id is None or self.confidence is None or not self.misconception):
            raise ValueError("gap findings need kc_id, confidence, and misconception")
        if not is_gap and (self.kc_id is not None or self.confidence is not None or self.misconception):
            raise ValueError("non-gap findings carry no kc_id/confidence/misconception")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")


@dataclass(frozen=True)
class KcEvidence:
    kc_id: str
    max_confidence: float
    first_detected_turn: int


@dataclass
class SessionReport:
    session_id: str
    registry_version: str
    status: str  # "analyzed" | "insufficient"
    findings: list[GapFinding] = field(default_factory=list)
    distinct_kcs: dict[str, KcEvidence] = field(default_factory=dict)
    unanalyzed_turns: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "registry_version": self.registry_version,
            "status": self.status,
            "findings": [
                {
                    "turn_index": f.turn_index,
                    "verdict": f.verdict,
                    "kc_id": f.kc_id,
                    "confidence": f.confidence,
                    "misconception": f.misconception,
                }
                for f in self.findings
            ],
            "distinct_kcs": {
                kc_id: {
                    "max_confidence": ev.max_confidence,
                    "first_detected_turn": ev.first_detected_turn,
                }
                for kc_id, ev in sorted(self.distinct_kcs.items())
            },
            "unanalyzed_turns": list(self.unanalyzed_turns),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SessionReport":
        findings = [
            GapFinding(
                session_id=payload["session_id"],
                turn_index=raw["turn_index"],
                verdict=raw["verdict"],
                kc_id=raw.get("kc_id"),
                confidence=raw.get("confidence"),
                misconception=raw.get("misconception") or "",
            )
            for raw in payload.get("findings", [])
        ]
        distinct = {
            kc_id: KcEvidence(
                kc_id=kc_id,
                max_confidence=raw["max_confidence"],
                first_detected_turn=raw["first_detected_turn"],
            )
            for kc_id, raw in payload.get("distinct_kcs", {}).items()
        }
        return cls(
            session_id=payload["session_id"],
            registry_version=payload["registry_version"],
            status=payload["status"],
            findings=findings,
            distinct_kcs=distinct,
            unanalyzed_turns=list(payload.get("unanalyzed_turns", [])),
        )


def rollup_distinct_kcs(findings: list[GapFinding]) -> dict[str, KcEvidence]:
    """Deduplicate gap findings: per KC keep max confidence and earliest turn."""
    rollup: dict[str, KcEvidence] = {}
    for finding in findings:
        if finding.verdict != "gap":
            continue
        assert finding.kc_id is not None and finding.confidence is not None
        current = rollup.get(finding.kc_id)
        if current is None:
            rollup[finding.kc_id] = KcEvidence(
                kc_id=finding.kc_id,
                max_confidence=finding.confidence,
                first_detected_turn=finding.turn_index,
            )
        else:
            rollup[finding.kc_id] = KcEvidence(
                kc_id=finding.kc_id,
                max_confidence=max(current.max_confidence, finding.confidence),
                first_detected_turn=min(current.first_detected_turn, finding.turn_index),
            )
    return rollup


def top_kc(report: SessionReport) -> str | None:
    """KC with the highest max-confidence; ties go to the earlier first
    detection turn, then to the lexicographically smaller id."""
    if not report.distinct_kcs:
        return None
    ordered = sorted(
        report.distinct_kcs.values(),
        key=lambda ev: (-ev.max_confidence, ev.first_detected_turn, ev.kc_id),
    )
    return ordered[0].kc_id


class GapAnalyzer:
    """Maps dialogue turns onto registry KCs via one gateway call per turn.

    Per-turn results are cached by (session, turn, content digest), so
    re-analyzing a session after each new student message only pays for the
    new turn. Unknown kc_ids in model output are dropped and tallied under
    diagnostics["unknown_kc_dropped"] rather than fuzzily matched.
    """

    def __init__(
        self,
        provider: Provider,
        registry: KcRegistry,
        min_evidence_chars: int = DEFAULT_MIN_EVIDENCE_CHARS,
        temperature: float = ANALYSIS_TEMPERATURE,
    ):
        self.provider = provider
        self.registry = registry
        self.min_evidence_chars = min_evidence_chars
        self.temperature = temperature
        self.diagnostics = {"unknown_kc_dropped": 0}
        self._kc_text = render_for_prompt(registry)
        self._cache: dict[tuple[str, int, str], list[GapFinding]] = {}
        self._lock = threading.Lock()

    def _pair_digest(self, pair: TurnPair) -> str:
        blob = f"{pair.agent_turn}\x00{pair.student_response}"
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _build_request(self, pair: TurnPair, history: list[ChatMessage]) -> CompletionRequest:
        transcript_lines = []
        for message in history:
            speaker = "Tutor" if message.role == "assistant" else "Student"
            transcript_lines.append(f"{speaker}: {message.content}")
        transcript = "\n".join(transcript_lines) if transcript_lines else "(start of conversation)"
        pair_text = (
            f"Tutor turn: {pair.agent_turn or '(none; this is the opening student message)'}\n"
            f"Student response: {pair.student_response}"
        )
        user_content = (
            f"Conversation so far:\n{transcript}\n\n"
            f"Exchange to analyze (turn {pair.index}):\n{pair_text}"
        )
        return CompletionRequest(
            messages=[
                ChatMessage("system", _ANALYST_PROMPT.format(kc_text=self._kc_text)),
                ChatMessage("user", user_content),
            ],
            response_schema=FINDING_LIST_SCHEMA,
            temperature=self.temperature,
            max_tokens=ANALYSIS_MAX_TOKENS,
        )

    def _parse_findings(self, session_id: str, pair: TurnPair, reply: str) -> list[GapFinding]:
        payload = json.loads(reply)
        findings: list[GapFinding] = []
        for raw in payload["findings"]:
            verdict = raw["verdict"]
            if verdict == "gap":
                kc_id = raw["kc_id"]
                if kc_id not in self.registry:
                    self.diagnostics["unknown_kc_dropped"] += 1
                    logger.warning("dropping finding with unknown kc_id %r", kc_id)
                    continue
                findings.append(
                    GapFinding(
                        session_id=session_id,
                        turn_index=pair.index,
                        verdict="gap",
                        kc_id=kc_id,
                        confidence=float(raw["confidence"]),
                        misconception=raw["misconception"],
                    )
                )
            else:
                findings.append(
                    GapFinding(session_id=session_id, turn_index=pair.index, verdict=verdict)
                )
        return findings

    def analyze_turn_pair(
        self,
        session_id: str,
        pair: TurnPair,
        history: list[ChatMessage],
    ) -> list[GapFinding]:
        """Analyze one exchange. Raises AnalysisFailed on schema breakdown;
        the turn stays unanalyzed and can be retried."""
        if len(self.registry) == 0:
            raise ValueError("registry must be non-empty")
        request = self._build_request(pair, history)
        try:
            reply = gateway.complete(self.provider, request)
        except SchemaViolation as exc:
            raise AnalysisFailed(f"turn {pair.index}: {exc}") from exc
        return self._parse_findings(session_id, pair, reply)

    def analyze_session(self, session: DialogueSession) -> SessionReport:
        """Analyze every turn pair of the session and roll findings up.

        Sessions with no pairs or with less than min_evidence_chars of
        student text are refused deterministically (status "insufficient")
        without any gateway call; the model may additionally declare a
        longer session insufficient by answering insufficient_evidence for
        every turn. Turn failures leave the turn listed in unanalyzed_turns
        while the rest of the report is still produced.
        """
        pairs = turn_pairs(session)
        student_chars = sum(len(p.student_response.strip()) for p in pairs)
        if not pairs or student_chars < self.min_evidence_chars:
            return SessionReport(
                session_id=session.session_id,
                registry_version=self.registry.version,
                status="insufficient",
            )

        findings: list[GapFinding] = []
        unanalyzed: list[int] = []
        cursor = 0
        for pair in pairs:
            # History = everything before this pair's tutor turn (or before
            # the student message when the pair has no tutor turn).
            history_end = cursor
            cursor = self._advance_past_pair(session, cursor, pair)
            key = (session.session_id, pair.index, self._pair_digest(pair))
            with self._lock:
                cached = self._cache.get(key)
            if cached is None:
                try:
                    cached = self.analyze_turn_pair(
                        session.session_id, pair, session.messages[:history_end]
                    )
                except AnalysisFailed:
                    unanalyzed.append(pair.index)
                    continue
                with self._lock:
                    self._cache[key] = cached
            findings.extend(cached)

        status = "analyzed"
        if (
            not unanalyzed
            and findings
            and all(f.verdict == "insufficient_evidence" for f in findings)
        ):
            status = "insufficient"
        if status == "insufficient":
            return SessionReport(
                session_id=session.session_id,
                registry_version=self.registry.version,
                status="insufficient",
            )
        return SessionReport(
            session_id=session.session_id,
            registry_version=self.registry.version,
            status="analyzed",
            findings=findings,
            distinct_kcs=rollup_distinct_kcs(findings),
            unanalyzed_turns=unanalyzed,
        )

    @staticmethod
    def _advance_past_pair(session: DialogueSession, cursor: int, pair: TurnPair) -> int:
        """Move the message cursor past the student message of this pair."""
        for position in range(cursor, len(session.messages)):
            message = session.messages[position]
            if message.role == "user" and message.content == pair.student_response:
                return position + 1
        return cursor
