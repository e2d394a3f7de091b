from __future__ import annotations

import json
import random

import pytest

from gaplens.kc import KcRegistry, parse_kc_list


@pytest.fixture
def three_component_doc() -> dict:
    return {
        "course_id": "fixture-course",
        "components": [
            {"id": "KC1", "title": "Top-level concept", "detail": ""},
            {"id": "KC1.1", "title": "Mid-level standard", "detail": "Some elaboration."},
            {"id": "KC1.1.1", "title": "Specific behavior", "detail": ""},
        ],
    }


@pytest.fixture
def three_component_registry(three_component_doc) -> KcRegistry:
    return parse_kc_list(three_component_doc)


def make_kc_document(
    course_id: str = "synthetic",
    top: int = 8,
    mids_per_top: int = 6,
    leaves_per_mid: int = 5,
) -> dict:
    """Synthetic hierarchical KC document; defaults yield 8+48+240 = 296 ids."""
    components = []
    for a in range(1, top + 1):
        components.append({"id": f"KC{a}", "title": f"Domain {a}", "detail": ""})
        for b in range(1, mids_per_top + 1):
            components.append(
                {"id": f"KC{a}.{b}", "title": f"Standard {a}.{b}", "detail": ""}
            )
            for c in range(1, leaves_per_mid + 1):
                components.append(
                    {
                        "id": f"KC{a}.{b}.{c}",
                        "title": f"Behavior {a}.{b}.{c}",
                        "detail": f"Detail text for {a}.{b}.{c}.",
                    }
                )
    return {"course_id": course_id, "components": components}


def make_random_kc_document(rng: random.Random, course_id: str = "random") -> dict:
    """Random-shape hierarchy: random branch widths, details, and titles."""
    components = []
    for a in range(1, rng.randint(1, 6) + 1):
        components.append(
            {"id": f"KC{a}", "title": f"Area {a} ({rng.randint(0, 999)})", "detail": ""}
        )
        for b in range(1, rng.randint(0, 5) + 1):
            components.append(
                {
                    "id": f"KC{a}.{b}",
                    "title": f"Topic {a}.{b}",
                    "detail": rng.choice(["", f"note {rng.randint(0, 99)}"]),
                }
            )
            for c in range(1, rng.randint(0, 4) + 1):
                components.append(
                    {
                        "id": f"KC{a}.{b}.{c}",
                        "title": f"Skill {a}.{b}.{c}",
                        "detail": rng.choice(["", "worked example included"]),
                    }
                )
    if not components:
        components.append({"id": "KC1", "title": "Area 1", "detail": ""})
    return {"course_id": course_id, "components": components}


@pytest.fixture
def synthetic_296_doc() -> dict:
    doc = make_kc_document()
    assert len(doc["components"]) == 296
    return doc


def finding_list_reply(*items: dict) -> str:
    """Scripted analyzer reply in the structured-output wire format."""
    return json.dumps({"findings": list(items)})


def gap_item(kc_id: str, confidence: float, misconception: str = "m") -> dict:
    return {
        "verdict": "gap",
        "kc_id": kc_id,
        "confidence": confidence,
        "misconception": misconception,
    }
