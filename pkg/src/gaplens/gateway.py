"""Single choke point for model calls.

Everything that talks to a chat-completion provider goes through this
module: prompt carriers, the HTTP provider with retries, structured-output
enforcement with one repair reprompt, and a deterministic scripted provider
so the rest of the pipeline can run fully offline.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field

import httpx
import jsonschema

from .errors import ProviderRejection, SchemaViolation, ScriptExhausted, TransportError

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")

# Env vars the service reads to reach a hosted provider.
ENV_PROVIDER_URL = "QQ_PROVIDER_URL"
ENV_MODEL = "QQ_MODEL"
ENV_API_KEY_VAR = "QQ_API_KEY_VAR"

DEFAULT_CONCURRENT_REQUESTS = 8

REPAIR_INSTRUCTION = (
    "Your previous reply was not valid JSON for the required schema ({error}). "
    "Reply again with ONLY a JSON object that satisfies the schema, no prose."
)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass
class CompletionRequest:
    messages: list[ChatMessage]
    response_schema: dict | None = None
    temperature: float = 0.2
    max_tokens: int = 800

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        system_positions = [i for i, m in enumerate(self.messages) if m.role == "system"]
        if system_positions and system_positions != [0]:
            raise ValueError("a system message must be unique and first")


@dataclass
class ProviderConfig:
    endpoint: str
    model: str
    api_key_var: str = "QQ_API_KEY"
    timeout_s: float = 30.0
    retry_limit: int = 2

    def __post_init__(self):
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")


def config_from_env() -> ProviderConfig:
    endpoint = os.environ.get(ENV_PROVIDER_URL, "")
    model = os.environ.get(ENV_MODEL, "")
    if not endpoint or not model:
        raise ValueError(f"{ENV_PROVIDER_URL} and {ENV_MODEL} must be set")
    return ProviderConfig(
        endpoint=endpoint,
        model=model,
        api_key_var=os.environ.get(ENV_API_KEY_VAR, "QQ_API_KEY"),
    )


class Provider:
    """A handle that turns a CompletionRequest into assistant text."""

    def send(self, request: CompletionRequest) -> str:
        raise NotImplementedError


class HttpProvider(Provider):
    """Chat-completion HTTP provider (messages array in, choice text out).

    Requests are idempotent reads by contract, so transport failures are
    retried up to ``config.retry_limit`` times; non-2xx answers are never
    retried. A per-provider semaphore caps concurrent in-flight requests.
    """

    def __init__(self, config: ProviderConfig, max_concurrent: int = DEFAULT_CONCURRENT_REQUESTS):
        self.config = config
        self._semaphore = threading.Semaphore(max_concurrent)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_var)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def send(self, request: CompletionRequest) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last_exc: Exception | None = None
        with self._semaphore:
            for attempt in range(self.config.retry_limit + 1):
                try:
                    response = httpx.post(
                        self.config.endpoint,
                        json=payload,
                        headers=self._headers(),
                        timeout=self.config.timeout_s,
                    )
                except httpx.HTTPError as exc:
                    last_exc = exc
                    logger.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                    continue
                if not 200 <= response.status_code < 300:
                    raise ProviderRejection(response.status_code, response.text)
                return self._extract_text(response.json())
        raise TransportError(
            f"provider unreachable after {self.config.retry_limit + 1} attempts: {last_exc}"
        )

    @staticmethod
    def _extract_text(body: dict) -> str:
        try:
            choice = body["choices"][0]
        except (KeyError, IndexError) as exc:
            raise ProviderRejection(200, f"malformed provider body: {body!r}") from exc
        if "message" in choice:
            return choice["message"]["content"]
        return choice["text"]


class ScriptedProvider(Provider):
    """Deterministic provider whose nth call returns the nth scripted reply.

    ``cycle=True`` makes the script repeat forever (used by the demo server,
    which must answer an unbounded number of chat turns). Every request is
    recorded so tests can inspect the prompts that were assembled.
    """

    def __init__(self, script: list[str], cycle: bool = False):
        self.script = list(script)
        self.cycle = cycle
        self.calls = 0
        self.requests: list[CompletionRequest] = []
        self._lock = threading.Lock()

    def send(self, request: CompletionRequest) -> str:
        with self._lock:
            index = self.calls
            if self.cycle and self.script:
                index = self.calls % len(self.script)
            if index >= len(self.script):
                raise ScriptExhausted(
                    f"scripted provider has {len(self.script)} replies, call #{self.calls + 1} requested"
                )
            self.calls += 1
            self.requests.append(request)
            return self.script[index]


def scripted_provider(script: list[str], cycle: bool = False) -> ScriptedProvider:
    return ScriptedProvider(script, cycle=cycle)


def _extract_json_text(reply: str) -> str:
    """Best-effort extraction of the JSON object embedded in a reply."""
    text = reply.strip()
    if text.startswith("```"):
        text = text.strip("`")
        if text.startswith("json"):
            text = text[4:]
        text = text.strip()
    if not text.startswith("{"):
        start = text.find("{")
        end = text.rfind("}")
        if start != -1 and end > start:
            text = text[start : end + 1]
    return text


def _validate_against_schema(reply: str, schema: dict) -> tuple[str | None, str]:
    """Return (canonical JSON text, "") on success or (None, reason)."""
    candidate = _extract_json_text(reply)
    try:
        parsed = json.loads(candidate)
    except json.JSONDecodeError as exc:
        return None, f"not valid JSON: {exc}"
    try:
        jsonschema.validate(parsed, schema)
    except jsonschema.ValidationError as exc:
        return None, f"schema violation: {exc.message}"
    return candidate, ""


def complete(provider: Provider, request: CompletionRequest) -> str:
    """Run one completion, enforcing the response schema when one is set.

    A reply that fails to parse triggers exactly one repair reprompt (the
    invalid reply plus a correction instruction are appended); a second
    failure raises SchemaViolation.
    """
    reply = provider.send(request)
    if request.response_schema is None:
        return reply

    validated, reason = _validate_against_schema(reply, request.response_schema)
    if validated is not None:
        return validated

    logger.info("structured reply invalid, issuing repair reprompt: %s", reason)
    repair_request = CompletionRequest(
        messages=[
            *request.messages,
            ChatMessage("assistant", reply or "(empty reply)"),
            ChatMessage("user", REPAIR_INSTRUCTION.format(error=reason)),
        ],
        response_schema=request.response_schema,
        temperature=request.temperature,
        max_tokens=request.max_tokens,
    )
    reply = provider.send(repair_request)
    validated, reason = _validate_against_schema(reply, request.response_schema)
    if validated is not None:
        return validated
    raise SchemaViolation(f"reply still invalid after repair reprompt: {reason}")
