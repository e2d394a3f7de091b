"""Knowledge-component registry.

A KC list is the course-wide vocabulary that gap findings and instructor
reports share. It is loaded from a JSON document of the form::

    {
      "course_id": "cs3600",
      "components": [
        {"id": "KC1", "title": "...", "detail": "..."},
        ...
      ]
    }

Component ids follow the grammar ``KC<int>("." <int>){0,2}`` and encode the
hierarchy: ``KC1.6.1`` is a child of ``KC1.6``, which is a child of ``KC1``.
The registry is immutable after parsing, so it can be shared read-only
across concurrent sessions.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import DuplicateId, EmptyRegistry, KcNotFound, MalformedDocument, OrphanParent

KC_ID_PATTERN = re.compile(r"^KC\d+(\.\d+){0,2}$")


@dataclass(frozen=True)
class KnowledgeComponent:
    id: str
    title: str
    detail: str = ""

    @property
    def depth(self) -> int:
        """Number of integer segments in the id (1, 2, or 3)."""
        return self.id.count(".") + 1

    @property
    def parent_id(self) -> str | None:
        """Id with the last segment removed; None at depth 1."""
        if self.depth == 1:
            return None
        return self.id.rsplit(".", 1)[0]


@dataclass(frozen=True)
class KcRegistry:
    course_id: str
    components: tuple[KnowledgeComponent, ...]
    version: str
    _by_id: dict[str, KnowledgeComponent] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __len__(self) -> int:
        return len(self.components)

    def __contains__(self, kc_id: str) -> bool:
        return kc_id in self._by_id

    def ids(self) -> list[str]:
        return [c.id for c in self.components]


def _canonical_document(course_id: str, components: list[KnowledgeComponent]) -> str:
    payload = {
        "course_id": course_id,
        "components": [
            {"id": c.id, "title": c.title, "detail": c.detail} for c in components
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _content_version(course_id: str, components: list[KnowledgeComponent]) -> str:
    canonical = _canonical_document(course_id, components)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_kc_list(document: str | dict) -> KcRegistry:
    """Parse and validate a KC list document into an immutable registry.

    Accepts either the raw JSON text or an already-decoded dict. Raises
    MalformedDocument, DuplicateId, OrphanParent, or EmptyRegistry.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise MalformedDocument("document root must be a JSON object")

    course_id = document.get("course_id")
    if not isinstance(course_id, str) or not course_id:
        raise MalformedDocument("course_id must be a non-empty string")
    raw_components = document.get("components")
    if not isinstance(raw_components, list):
        raise MalformedDocument("components must be a list")
    if not raw_components:
        raise EmptyRegistry("KC list declares no components")

    components: list[KnowledgeComponent] = []
    seen: set[str] = set()
    for pos, raw in enumerate(raw_components):
        if not isinstance(raw, dict):
            raise MalformedDocument(f"component #{pos} is not an object")
        kc_id = raw.get("id")
        title = raw.get("title")
        detail = raw.get("detail", "")
        if not isinstance(kc_id, str) or not KC_ID_PATTERN.match(kc_id):
            raise MalformedDocument(f"component #{pos} id {kc_id!r} violates the KC id grammar")
        if not isinstance(title, str) or not title.strip():
            raise MalformedDocument(f"component {kc_id} has an empty title")
        if not isinstance(detail, str):
            raise MalformedDocument(f"component {kc_id} detail must be a string")
        if kc_id in seen:
            raise DuplicateId(f"component id {kc_id} declared more than once")
        seen.add(kc_id)
        components.append(KnowledgeComponent(id=kc_id, title=title, detail=detail))

    for comp in components:
        parent = comp.parent_id
        if parent is not None and parent not in seen:
            raise OrphanParent(f"component {comp.id} has no declared parent {parent}")

    registry = KcRegistry(
        course_id=course_id,
        components=tuple(components),
        version=_content_version(course_id, components),
        _by_id={c.id: c for c in components},
    )
    return registry


def load_kc_list(path: str) -> KcRegistry:
    with open(path, encoding="utf-8") as fh:
        return parse_kc_list(fh.read())


def serialize_kc_list(registry: KcRegistry) -> str:
    """Render the registry back to its JSON document form (round-trip safe)."""
    payload = {
        "course_id": registry.course_id,
        "components": [
            {"id": c.id, "title": c.title, "detail": c.detail}
            for c in registry.components
        ],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def lookup(registry: KcRegistry, kc_id: str) -> KnowledgeComponent:
    try:
        return registry._by_id[kc_id]
    except KeyError:
        raise KcNotFound(f"no component with id {kc_id!r}") from None


def render_for_prompt(registry: KcRegistry) -> str:
    """Deterministic hierarchy-indented text form for system prompts.

    One ``<id>: <title>`` line per component in document order, indented two
    spaces per depth level; non-empty details follow on their own line.
    """
    lines: list[str] = []
    for comp in registry.components:
        indent = "  " * (comp.depth - 1)
        lines.append(f"{indent}{comp.id}: {comp.title}")
        if comp.detail:
            lines.append(f"{indent}   {comp.detail}")
    return "\n".join(lines) + "\n"
