"""HTTP service binding the pipeline together for live classroom use.

Students chat through POST /api/sessions/{id}/messages (replies stream as
server-sent events); a background worker re-analyzes each session after
every student message and folds analyzed reports into the class-wide
aggregator. Instructors pull ranked reports with a bearer token. All state
changes go through the append-only event log, so a restart replays to the
exact pre-shutdown state.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import queue
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .aggregate import GapAggregator
from .analysis import GapAnalyzer, SessionReport
from .dialogue import DialogueAgent, DialogueSession, SessionStore
from .errors import CorruptEvent, RespondFailed, StaleRegistry
from .events import Event, EventLog, read_events
from .gateway import ChatMessage, Provider
from .kc import KcRegistry
from .retrieval import ChunkIndex

logger = logging.getLogger(__name__)

ENV_INSTRUCTOR_TOKEN = "QQ_INSTRUCTOR_TOKEN"

SSE_CHUNK_CHARS = 48


@dataclass(frozen=True)
class InstructorToken:
    """Reference to the shared instructor secret; the value itself is only
    ever read from the environment and never logged or persisted."""

    env_var: str = ENV_INSTRUCTOR_TOKEN
    scope: str = "reports"

    def resolve(self) -> str | None:
        return os.environ.get(self.env_var)


def pseudonymize(student_id: str | None, salt: str) -> str:
    """Salted one-way hash of the client identifier; raw ids never stored."""
    if not student_id:
        return "anon:" + uuid.uuid4().hex[:16]
    digest = hashlib.sha256(f"{salt}\x00{student_id}".encode("utf-8")).hexdigest()
    return "anon:" + digest[:16]


class ServiceState:
    """Everything the endpoints and the analysis worker share."""

    def __init__(
        self,
        registry: KcRegistry,
        index: ChunkIndex | None,
        dialogue_provider: Provider,
        analysis_provider: Provider,
        log_path: str | Path,
        instructor_token: str | None = None,
        lecture_minutes: int = 60,
        student_salt: str = "gaplens",
        probing_intensity: str = "closing_question",
    ):
        self.registry = registry
        self.store = SessionStore()
        self.reports: dict[str, SessionReport] = {}
        self.agent = DialogueAgent(
            provider=dialogue_provider,
            index=index,
            course_id=registry.course_id,
            probing_intensity=probing_intensity,
        )
        self.analyzer = GapAnalyzer(provider=analysis_provider, registry=registry)
        self.aggregator = GapAggregator(
            course_id=registry.course_id, registry_version=registry.version
        )
        self.log = EventLog(log_path)
        self.instructor_token = instructor_token
        self.lecture_minutes = lecture_minutes
        self.student_salt = student_salt
        self.analysis_queue: "queue.Queue[str | None]" = queue.Queue()
        self._pending = 0
        self._pending_lock = threading.Lock()
        self._aggregate_lock = threading.Lock()
        self._workers: list[threading.Thread] = []
        self._stop = threading.Event()

    # --- pending-analysis bookkeeping ---

    @property
    def pending_analysis(self) -> int:
        with self._pending_lock:
            return self._pending

    def enqueue_analysis(self, session_id: str) -> None:
        with self._pending_lock:
            self._pending += 1
        self.analysis_queue.put(session_id)

    def _analysis_done(self) -> None:
        with self._pending_lock:
            self._pending -= 1

    # --- background worker ---

    def _analyze_one(self, session_id: str) -> None:
        session = self.store.get(session_id)
        if session is None:
            return
        with self.store.lock(session_id):
            report = self.analyzer.analyze_session(session)
        self.reports[session_id] = report
        self.log.append(
            "report_stored", {"session_id": session_id, "report": report.to_dict()}
        )
        if report.status != "analyzed":
            return
        with self._aggregate_lock:
            recorded_at = time.time()
            try:
                self.aggregator.record(report, recorded_at=recorded_at)
            except StaleRegistry as exc:
                logger.warning("session %s quarantined: %s", session_id, exc)
                return
            self.log.append(
                "aggregate_recorded",
                {
                    "session_id": session_id,
                    "recorded_at": recorded_at,
                    "kc_ids": sorted(report.distinct_kcs),
                },
            )

    def _worker_loop(self) -> None:
        while not self._stop.is_set():
            try:
                session_id = self.analysis_queue.get(timeout=0.1)
            except queue.Empty:
                continue
            if session_id is None:
                break
            try:
                self._analyze_one(session_id)
            except Exception:
                logger.exception("analysis of session %s failed", session_id)
            finally:
                self._analysis_done()

    def start_workers(self, count: int = 1) -> None:
        self._stop.clear()
        for n in range(count):
            thread = threading.Thread(
                target=self._worker_loop, name=f"analysis-worker-{n}", daemon=True
            )
            thread.start()
            self._workers.append(thread)

    def stop_workers(self) -> None:
        self._stop.set()
        for _ in self._workers:
            self.analysis_queue.put(None)
        for thread in self._workers:
            thread.join(timeout=2.0)
        self._workers.clear()

    # --- windows ---

    def window_for(self, name: str | None) -> tuple[float | None, float | None] | None:
        if name in (None, "", "all"):
            return None
        if name == "lecture":
            return (time.time() - self.lecture_minutes * 60, None)
        raise ValueError(f"unknown window {name!r} (use 'lecture' or 'all')")


def replay(
    log_path: str | Path,
    registry: KcRegistry,
    index: ChunkIndex | None,
    dialogue_provider: Provider,
    analysis_provider: Provider,
    allow_partial_tail: bool = False,
    **state_kwargs,
) -> ServiceState:
    """Rebuild service state by folding the event log in order.

    Undecodable events raise CorruptEvent at the offending seq. The fold
    applies the same rules as the live path, so a replayed aggregator equals
    the pre-shutdown one.
    """
    events = read_events(log_path, allow_partial_tail=allow_partial_tail)
    state = ServiceState(
        registry=registry,
        index=index,
        dialogue_provider=dialogue_provider,
        analysis_provider=analysis_provider,
        log_path=log_path,
        **state_kwargs,
    )
    apply_events(state, events)
    return state


def apply_events(state: ServiceState, events: list[Event]) -> None:
    for event in events:
        payload = event.payload
        try:
            if event.kind == "session_created":
                state.store.create(
                    course_id=payload["course_id"],
                    student_ref=payload["student_ref"],
                    session_id=payload["session_id"],
                    created_at=event.ts,
                )
            elif event.kind == "message_appended":
                session = state.store.get(payload["session_id"])
                if session is None:
                    raise ValueError(f"message for unknown session {payload['session_id']}")
                session.messages.append(ChatMessage(payload["role"], payload["content"]))
                session.touch(event.ts)
            elif event.kind == "report_stored":
                report = SessionReport.from_dict(payload["report"])
                state.reports[report.session_id] = report
            elif event.kind == "aggregate_recorded":
                report = state.reports[payload["session_id"]]
                try:
                    state.aggregator.record(report, recorded_at=payload["recorded_at"])
                except StaleRegistry:
                    logger.warning(
                        "replayed session %s quarantined (stale registry)",
                        payload["session_id"],
                    )
        except CorruptEvent:
            raise
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptEvent(event.seq, str(exc)) from exc


# --- HTTP layer ---

class CreateSessionBody(BaseModel):
    student_id: str | None = None


class MessageBody(BaseModel):
    text: str


def _sse_chunks(reply: str) -> list[str]:
    """Split a completed reply into streamable pieces on word boundaries."""
    chunks: list[str] = []
    current = ""
    for word in reply.split(" "):
        candidate = f"{current} {word}" if current else word
        if len(candidate) > SSE_CHUNK_CHARS and current:
            chunks.append(current + " ")
            current = word
        else:
            current = candidate
    if current:
        chunks.append(current)
    return chunks


def create_app(state: ServiceState, workers: int = 1, ui_dir: str | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(_: FastAPI):
        state.start_workers(workers)
        yield
        state.stop_workers()

    app = FastAPI(title="gaplens", lifespan=lifespan)
    app.state.service = state

    def require_instructor(request: Request) -> None:
        token = state.instructor_token
        if not token:
            raise HTTPException(status_code=503, detail="instructor token not configured")
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="instructor token required")

    def get_session_or_404(session_id: str) -> DialogueSession:
        session = state.store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.exception_handler(HTTPException)
    async def error_payload(_, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"error": exc.detail})

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "course_id": state.registry.course_id,
            "registry_version": state.registry.version,
            "events": state.log.last_seq,
            "pending_analysis": state.pending_analysis,
            "sessions_recorded": state.aggregator.sessions_recorded(),
        }

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        student_ref = pseudonymize(body.student_id, state.student_salt)
        session = state.store.create(
            course_id=state.registry.course_id, student_ref=student_ref
        )
        state.log.append(
            "session_created",
            {
                "session_id": session.session_id,
                "course_id": session.course_id,
                "student_ref": student_ref,
            },
            ts=session.created_at,
        )
        return {"session_id": session.session_id}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody, stream: bool = True):
        session = get_session_or_404(session_id)
        if not body.text or not body.text.strip():
            raise HTTPException(status_code=400, detail="message text must be non-empty")
        with state.store.lock(session_id):
            state.log.append(
                "message_appended",
                {"session_id": session_id, "role": "user", "content": body.text},
            )
            try:
                reply = state.agent.respond(session, body.text)
            except RespondFailed as exc:
                state.enqueue_analysis(session_id)
                raise HTTPException(status_code=502, detail=str(exc)) from exc
            state.log.append(
                "message_appended",
                {"session_id": session_id, "role": "assistant", "content": reply},
            )
        state.enqueue_analysis(session_id)

        if not stream:
            return {"session_id": session_id, "reply": reply}

        def event_stream():
            for piece in _sse_chunks(reply):
                yield f"data: {json.dumps({'delta': piece})}\n\n"
            yield "data: [DONE]\n\n"

        return StreamingResponse(event_stream(), media_type="text/event-stream")

    @app.get("/api/sessions/{session_id}")
    def get_transcript(session_id: str):
        session = get_session_or_404(session_id)
        return {
            "session_id": session.session_id,
            "course_id": session.course_id,
            "created_at": session.created_at,
            "updated_at": session.updated_at,
            "messages": [
                {"role": m.role, "content": m.content} for m in session.messages
            ],
        }

    @app.get("/api/reports/top", dependencies=[Depends(require_instructor)])
    def top_report(n: int = 5, window: str = "all"):
        if n < 1:
            raise HTTPException(status_code=400, detail="n must be >= 1")
        try:
            report = state.aggregator.top_n(n, window=state.window_for(window))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return report.to_dict()

    @app.get("/api/reports/sessions/{session_id}", dependencies=[Depends(require_instructor)])
    def session_report(session_id: str):
        get_session_or_404(session_id)
        report = state.reports.get(session_id)
        if report is None:
            raise HTTPException(status_code=404, detail="session not analyzed yet")
        return report.to_dict()

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
