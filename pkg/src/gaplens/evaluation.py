"""Offline evaluation harness.

Simulated students with planted missing KCs run against the full pipeline
(tutor -> analyzer -> aggregator), and the resulting reports are scored
with four metrics: detection rate, speed of detection, top-1 accuracy, and
the class-wide frequency distribution. A separate superset-inclusion check
scores labeled transcripts: a dialogue counts as complete when the analyzer
found every labeled KC (it may find more, never less).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .aggregate import FrequencyReport, GapAggregator
from .analysis import GapAnalyzer, SessionReport, top_kc
from .dialogue import DialogueAgent, DialogueSession
from .errors import EmptyResults, MisalignedIds, NoDetections, ScriptExhausted
from .gateway import ChatMessage, CompletionRequest, Provider
from .kc import KcRegistry

logger = logging.getLogger(__name__)

BEHAVIORS = ("terse", "verbose", "copies-material", "asks-follow-ups")
MODES = ("scripted", "model-driven")

_PERSONA_PROMPT = """You are role-playing a university student chatting with a course teaching assistant. Stay in character for the whole conversation.

Your hidden flaw: you misunderstand this course concept and everything it covers:
{missing_kc_text}

Behavior style: {behavior}.

Rules:
- Never announce or volunteer the misconception directly; it should only surface when the tutor's questions probe the relevant reasoning.
- Ask for help the way a real student would, with a concrete task or question.
- Keep each message short (1-3 sentences). Reply only with the student's next message."""


@dataclass
class StudentProfile:
    profile_id: str
    group_id: str
    missing_kc: str
    behavior: str = "terse"
    script: list[str] | None = None

    def __post_init__(self):
        if self.behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {self.behavior!r}")

    def to_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "group_id": self.group_id,
            "missing_kc": self.missing_kc,
            "behavior": self.behavior,
            "script": self.script,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StudentProfile":
        return cls(
            profile_id=payload["profile_id"],
            group_id=payload["group_id"],
            missing_kc=payload["missing_kc"],
            behavior=payload.get("behavior", "terse"),
            script=payload.get("script"),
        )


def load_profiles(path: str) -> list[StudentProfile]:
    with open(path, encoding="utf-8") as fh:
        return [StudentProfile.from_dict(raw) for raw in json.load(fh)]


def session_from_transcript(payload: dict, course_id: str = "transcript") -> DialogueSession:
    """Build an analyzable session from a {dialogue_id, messages} record."""
    session = DialogueSession(
        session_id=payload["dialogue_id"],
        course_id=course_id,
        student_ref=payload.get("student_ref", "transcript"),
    )
    for raw in payload["messages"]:
        session.messages.append(ChatMessage(raw["role"], raw["content"]))
    return session


@dataclass
class EvalResult:
    profile_id: str
    detected: bool
    first_turn: int | None
    top1_match: bool
    report: SessionReport

    def __post_init__(self):
        if self.detected != (self.first_turn is not None):
            raise ValueError("detected must hold exactly when first_turn is present")
        if self.top1_match and not self.detected:
            raise ValueError("top1_match implies detected")


def _student_message_model_driven(
    student_provider: Provider,
    profile: StudentProfile,
    missing_kc_text: str,
    session: DialogueSession,
) -> str:
    """Ask the persona model for the student's next message."""
    history: list[ChatMessage] = [
        ChatMessage(
            "system",
            _PERSONA_PROMPT.format(missing_kc_text=missing_kc_text, behavior=profile.behavior),
        )
    ]
    # The student model sees the conversation from its own side: tutor turns
    # arrive as user messages, its past messages as assistant turns.
    for message in session.messages:
        flipped = "assistant" if message.role == "user" else "user"
        history.append(ChatMessage(flipped, message.content))
    if len(history) == 1:
        history.append(ChatMessage("user", "(the tutor chat is open; send your first question)"))
    from . import gateway

    return gateway.complete(
        student_provider,
        CompletionRequest(messages=history, temperature=0.7, max_tokens=300),
    )


def simulate_dialogue(
    profile: StudentProfile,
    max_turns: int,
    mode: str,
    agent: DialogueAgent,
    registry: KcRegistry | None = None,
    student_provider: Provider | None = None,
    session_id: str | None = None,
) -> DialogueSession:
    """Drive one simulated student conversation through the tutor agent.

    Scripted mode replays profile.script (at most max_turns messages);
    model-driven mode generates each student message from a persona prompt
    that harbors, but never volunteers, the missing KC.
    """
    if max_turns < 1:
        raise ValueError("max_turns must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    session = DialogueSession(
        session_id=session_id or f"sim-{profile.profile_id}",
        course_id=agent.course_id,
        student_ref=profile.profile_id,
    )
    if mode == "scripted":
        if not profile.script:
            raise ScriptExhausted(f"profile {profile.profile_id} has no script")
        for utterance in profile.script[:max_turns]:
            agent.respond(session, utterance)
        return session

    if student_provider is None:
        raise ValueError("model-driven mode needs a student_provider")
    if registry is None:
        raise ValueError("model-driven mode needs the registry to describe the missing KC")
    from .kc import lookup

    component = lookup(registry, profile.missing_kc)
    missing_kc_text = f"{component.id}: {component.title}"
    if component.detail:
        missing_kc_text += f"\n{component.detail}"
    for _ in range(max_turns):
        message = _student_message_model_driven(
            student_provider, profile, missing_kc_text, session
        )
        agent.respond(session, message)
    return session


# --- metrics ---

def detection_rate(results: list[EvalResult]) -> float:
    """Fraction of conversations whose planted KC appears in the report."""
    if not results:
        raise EmptyResults("detection_rate needs at least one result")
    detected = sum(1 for r in results if r.detected)
    return detected / len(results)


def speed_of_detection(results: list[EvalResult]) -> float:
    """Mean turn index of first detection, over detected conversations only."""
    first_turns = [r.first_turn for r in results if r.detected and r.first_turn is not None]
    if not first_turns:
        raise NoDetections("no conversation detected its planted KC")
    return sum(first_turns) / len(first_turns)


def top1_accuracy(results: list[EvalResult]) -> float:
    """Fraction of conversations whose highest-confidence KC is the planted one."""
    if not results:
        raise EmptyResults("top1_accuracy needs at least one result")
    matches = sum(1 for r in results if r.top1_match)
    return matches / len(results)


def completeness(
    labels: dict[str, list[str]],
    reports: list[SessionReport],
) -> tuple[dict[str, bool], float]:
    """Superset-inclusion score over labeled dialogues.

    A dialogue succeeds when its report is analyzed and its distinct KC set
    contains every labeled KC. Label keys and report session ids must match
    exactly (MisalignedIds otherwise).
    """
    by_id = {report.session_id: report for report in reports}
    if set(labels) != set(by_id):
        missing = sorted(set(labels) ^ set(by_id))
        raise MisalignedIds(f"labels and reports disagree on ids: {missing}")
    outcomes: dict[str, bool] = {}
    for dialogue_id, labeled_kcs in labels.items():
        report = by_id[dialogue_id]
        outcomes[dialogue_id] = report.status == "analyzed" and set(labeled_kcs) <= set(
            report.distinct_kcs
        )
    fraction = sum(outcomes.values()) / len(outcomes) if outcomes else 0.0
    return outcomes, fraction


# --- end-to-end benchmark ---

@dataclass
class BenchmarkRun:
    results: list[EvalResult]
    frequency_report: FrequencyReport
    distribution: dict[str, int]
    metrics: dict[str, float]
    failures: dict[str, str] = field(default_factory=dict)
    reports: list[SessionReport] = field(default_factory=list)

    def metrics_json(self) -> str:
        blob = {
            "metrics": self.metrics,
            "notes": {
                "speed_of_detection": "mean first-detection turn over detected conversations only",
                "turn_indexing": "turn 1 is the first student message",
            },
            "profiles": len(self.results) + len(self.failures),
            "failures": self.failures,
            "distribution": dict(sorted(self.distribution.items())),
        }
        return json.dumps(blob, indent=2)


def evaluate_report(profile: StudentProfile, report: SessionReport) -> EvalResult:
    evidence = report.distinct_kcs.get(profile.missing_kc)
    return EvalResult(
        profile_id=profile.profile_id,
        detected=evidence is not None,
        first_turn=evidence.first_detected_turn if evidence else None,
        top1_match=top_kc(report) == profile.missing_kc,
        report=report,
    )


def run_benchmark(
    profiles: list[StudentProfile],
    registry: KcRegistry,
    mode: str,
    agent: DialogueAgent,
    analyzer: GapAnalyzer,
    student_provider: Provider | None = None,
    max_turns: int = 4,
    top_n: int = 10,
) -> BenchmarkRun:
    """simulate -> analyze -> aggregate for every profile, then score.

    Profiles run serially so scripted providers replay deterministically.
    Per-profile failures are collected rather than aborting the run; metrics
    cover the profiles that produced a result.
    """
    aggregator = GapAggregator(course_id=agent.course_id, registry_version=registry.version)
    results: list[EvalResult] = []
    reports: list[SessionReport] = []
    failures: dict[str, str] = {}
    for profile in profiles:
        try:
            session = simulate_dialogue(
                profile,
                max_turns=max_turns,
                mode=mode,
                agent=agent,
                registry=registry,
                student_provider=student_provider,
            )
            report = analyzer.analyze_session(session)
        except Exception as exc:  # noqa: BLE001 - partial results by contract
            logger.warning("profile %s failed: %s", profile.profile_id, exc)
            failures[profile.profile_id] = str(exc)
            continue
        reports.append(report)
        if report.status == "analyzed":
            aggregator.record(report)
        results.append(evaluate_report(profile, report))

    metrics: dict[str, float] = {}
    if results:
        metrics["detection_rate"] = detection_rate(results)
        metrics["top1_accuracy"] = top1_accuracy(results)
        try:
            metrics["speed_of_detection"] = speed_of_detection(results)
        except NoDetections:
            metrics["speed_of_detection"] = float("nan")
    return BenchmarkRun(
        results=results,
        frequency_report=aggregator.top_n(top_n),
        distribution=aggregator.distribution(),
        metrics=metrics,
        failures=failures,
        reports=reports,
    )
