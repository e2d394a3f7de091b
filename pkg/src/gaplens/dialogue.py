"""Student-facing tutoring agent.

Holds the dialogue sessions, assembles the probing-strategy prompt with
retrieved course material, and turns finished exchanges into the
(tutor turn, student response) pairs that gap analysis consumes.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from . import gateway
from .errors import RespondFailed, GaplensError
from .gateway import ChatMessage, CompletionRequest, Provider
from .retrieval import ChunkIndex, retrieve

PROBING_INTENSITIES = ("off", "closing_question", "interleaved")

DIALOGUE_TEMPERATURE = 0.7
DIALOGUE_MAX_TOKENS = 700

_STRATEGY_STEPS = """Interaction strategy:
1. First, acknowledge their specific issue and offer a solution.
2. As you explain the solution, naturally incorporate questions that help reveal their conceptual understanding.
3. Conclude with follow-up questions as next steps.

Examples of natural diagnostic questions:
- It seems you might be encountering an issue with [concept]. How do you typically think about [concept] when you're designing your solution?
- What's your goal after this step? Knowing that will help me suggest the most appropriate method."""

_INTERLEAVED_NOTE = (
    "Weave short diagnostic questions into every explanation step, "
    "not only at the end."
)

_BASE_PROMPT = """You are a patient, encouraging teaching assistant for the course "{course_id}". Answer the student's question accurately and ground every explanation in the course material excerpts below. Stay on course topics; if the excerpts do not cover something, say so rather than inventing material."""

_CONTEXT_HEADER = "Course material excerpts:"


def build_system_prompt(course_id: str, context_chunks: list[str], probing_intensity: str = "closing_question") -> str:
    if probing_intensity not in PROBING_INTENSITIES:
        raise ValueError(f"unknown probing_intensity {probing_intensity!r}")
    parts = [_BASE_PROMPT.format(course_id=course_id)]
    if probing_intensity != "off":
        parts.append(_STRATEGY_STEPS)
    if probing_intensity == "interleaved":
        parts.append(_INTERLEAVED_NOTE)
    context = "\n\n".join(context_chunks) if context_chunks else "(no relevant excerpts found)"
    parts.append(f"{_CONTEXT_HEADER}\n{context}")
    return "\n\n".join(parts)


@dataclass
class DialogueSession:
    session_id: str
    course_id: str
    student_ref: str
    messages: list[ChatMessage] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)

    def touch(self, ts: float | None = None) -> None:
        now = time.time() if ts is None else ts
        self.updated_at = max(self.updated_at, now)


@dataclass(frozen=True)
class TurnPair:
    """One unit of gap analysis: tutor turn and the student response to it.

    The opening student message has no preceding tutor turn; it forms the
    first pair with an empty agent_turn. Indices are dense from 1.
    """

    index: int
    agent_turn: str
    student_response: str


def turn_pairs(session: DialogueSession) -> list[TurnPair]:
    """One pair per student message, in order.

    agent_turn is the nearest assistant message preceding the student
    message (empty when there is none, which covers the opening message).
    """
    pairs: list[TurnPair] = []
    last_assistant = ""
    for message in session.messages:
        if message.role == "assistant":
            last_assistant = message.content
        elif message.role == "user":
            pairs.append(
                TurnPair(
                    index=len(pairs) + 1,
                    agent_turn=last_assistant,
                    student_response=message.content,
                )
            )
    return pairs


class SessionStore:
    """In-memory session collection with per-session write serialization."""

    def __init__(self):
        self._sessions: dict[str, DialogueSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()

    def create(
        self,
        course_id: str,
        student_ref: str,
        session_id: str | None = None,
        created_at: float | None = None,
    ) -> DialogueSession:
        with self._store_lock:
            sid = session_id or uuid.uuid4().hex
            if sid in self._sessions:
                raise ValueError(f"session {sid} already exists")
            ts = time.time() if created_at is None else created_at
            session = DialogueSession(
                session_id=sid,
                course_id=course_id,
                student_ref=student_ref,
                created_at=ts,
                updated_at=ts,
            )
            self._sessions[sid] = session
            self._locks[sid] = threading.Lock()
            return session

    def get(self, session_id: str) -> DialogueSession | None:
        return self._sessions.get(session_id)

    def lock(self, session_id: str) -> threading.Lock:
        with self._store_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def all_sessions(self) -> list[DialogueSession]:
        return list(self._sessions.values())

    def __len__(self) -> int:
        return len(self._sessions)


class DialogueAgent:
    """Retrieval-grounded tutor that ends its replies with probing questions."""

    def __init__(
        self,
        provider: Provider,
        index: ChunkIndex | None,
        course_id: str,
        k: int = 4,
        probing_intensity: str = "closing_question",
        temperature: float = DIALOGUE_TEMPERATURE,
        max_tokens: int = DIALOGUE_MAX_TOKENS,
    ):
        if probing_intensity not in PROBING_INTENSITIES:
            raise ValueError(f"unknown probing_intensity {probing_intensity!r}")
        self.provider = provider
        self.index = index
        self.course_id = course_id
        self.k = k
        self.probing_intensity = probing_intensity
        self.temperature = temperature
        self.max_tokens = max_tokens

    def _context_for(self, query: str) -> list[str]:
        if self.index is None or len(self.index) == 0:
            return []
        chunks = retrieve(self.index, query, k=self.k)
        return [f"[{c.doc_id} #{c.seq}] {c.text}" for c in chunks]

    def build_request(self, session: DialogueSession, student_message: str) -> CompletionRequest:
        system = build_system_prompt(
            self.course_id, self._context_for(student_message), self.probing_intensity
        )
        history = [m for m in session.messages if m.role != "system"]
        return CompletionRequest(
            messages=[ChatMessage("system", system), *history],
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )

    def respond(self, session: DialogueSession, student_message: str) -> str:
        """Append the student message, produce and persist the tutor reply.

        On a gateway failure the student message stays stored (it was real
        input) and RespondFailed is raised; no assistant text is recorded.
        """
        if not student_message or not student_message.strip():
            raise ValueError("student message must be non-empty")
        session.messages.append(ChatMessage("user", student_message))
        session.touch()
        request = self.build_request(session, student_message)
        try:
            reply = gateway.complete(self.provider, request)
        except GaplensError as exc:
            raise RespondFailed(f"tutor reply failed: {exc}") from exc
        session.messages.append(ChatMessage("assistant", reply))
        session.touch()
        return reply
