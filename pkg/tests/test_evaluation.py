from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplens import demo
from gaplens.analysis import GapAnalyzer, SessionReport
from gaplens.dialogue import DialogueAgent, turn_pairs
from gaplens.errors import EmptyResults, MisalignedIds, NoDetections, ScriptExhausted
from gaplens.evaluation import (
    EvalResult,
    StudentProfile,
    completeness,
    detection_rate,
    run_benchmark,
    session_from_transcript,
    simulate_dialogue,
    speed_of_detection,
    top1_accuracy,
)
from gaplens.gateway import ScriptedProvider

from conftest import finding_list_reply, gap_item


def make_result(profile_id: str, detected: bool, first_turn: int | None, top1: bool) -> EvalResult:
    report = SessionReport(session_id=profile_id, registry_version="v", status="analyzed")
    return EvalResult(
        profile_id=profile_id,
        detected=detected,
        first_turn=first_turn,
        top1_match=top1,
        report=report,
    )


def scripted_agent(replies: list[str]) -> DialogueAgent:
    return DialogueAgent(
        provider=ScriptedProvider(replies), index=None, course_id="ai-101"
    )


# --- simulate_dialogue ---

def test_scripted_profile_stops_when_script_ends():
    profile = StudentProfile(
        profile_id="p1",
        group_id="g1",
        missing_kc="KC1.6.1",
        script=["first long enough student message", "second long enough student message"],
    )
    agent = scripted_agent(["reply one?", "reply two?"])
    session = simulate_dialogue(profile, max_turns=5, mode="scripted", agent=agent)
    assert sum(1 for m in session.messages if m.role == "user") == 2
    assert len(turn_pairs(session)) == 2


def test_max_turns_caps_scripted_messages():
    profile = StudentProfile(
        profile_id="p1", group_id="g1", missing_kc="KC1.6.1",
        script=["one message", "two message", "three message"],
    )
    agent = scripted_agent(["r1?", "r2?"])
    session = simulate_dialogue(profile, max_turns=2, mode="scripted", agent=agent)
    assert sum(1 for m in session.messages if m.role == "user") == 2


def test_zero_max_turns_rejected():
    profile = StudentProfile(profile_id="p", group_id="g", missing_kc="KC1", script=["x"])
    with pytest.raises(ValueError):
        simulate_dialogue(profile, max_turns=0, mode="scripted", agent=scripted_agent([]))


def test_scripted_mode_without_script_raises():
    profile = StudentProfile(profile_id="p", group_id="g", missing_kc="KC1")
    with pytest.raises(ScriptExhausted):
        simulate_dialogue(profile, max_turns=2, mode="scripted", agent=scripted_agent([]))


def test_unknown_mode_rejected():
    profile = StudentProfile(profile_id="p", group_id="g", missing_kc="KC1", script=["x"])
    with pytest.raises(ValueError):
        simulate_dialogue(profile, max_turns=1, mode="telepathic", agent=scripted_agent([]))


def test_model_driven_mode_prompts_persona_to_withhold_gap():
    registry = demo.demo_registry()
    student_provider = ScriptedProvider(["why does my validation accuracy drop on the test set?"])
    agent = scripted_agent(["reply with a probing question?"])
    profile = StudentProfile(profile_id="p", group_id="g", missing_kc="KC1.6.1")
    session = simulate_dialogue(
        profile,
        max_turns=1,
        mode="model-driven",
        agent=agent,
        registry=registry,
        student_provider=student_provider,
    )
    persona_prompt = student_provider.requests[0].messages[0].content
    assert "KC1.6.1" in persona_prompt
    assert "Never announce or volunteer" in persona_prompt
    assert sum(1 for m in session.messages if m.role == "user") == 1


def test_scripted_runs_are_bit_identical():
    def run_once() -> str:
        profiles, registry, agent, analyzer = demo.build_benchmark()
        sessions = [
            simulate_dialogue(p, max_turns=4, mode="scripted", agent=agent) for p in profiles
        ]
        return json.dumps(
            [[(m.role, m.content) for m in s.messages] for s in sessions], sort_keys=True
        )

    assert run_once() == run_once()


# --- metric arithmetic ---

def test_detection_rate_examples():
    all_detected = [make_result(f"p{i}", True, 1, True) for i in range(20)]
    assert detection_rate(all_detected) == 1.0
    none_detected = [make_result(f"p{i}", False, None, False) for i in range(5)]
    assert detection_rate(none_detected) == 0.0
    mixed = [
        make_result("a", True, 1, False),
        make_result("b", True, 1, False),
        make_result("c", False, None, False),
        make_result("d", True, 2, False),
    ]
    assert detection_rate(mixed) == 0.75


def test_detection_rate_empty_rejected():
    with pytest.raises(EmptyResults):
        detection_rate([])


def test_speed_of_detection_examples():
    results = [
        make_result("a", True, 1, False),
        make_result("b", True, 1, False),
        make_result("c", True, 2, False),
    ]
    assert speed_of_detection(results) == pytest.approx(4 / 3)
    assert speed_of_detection([make_result("x", True, 4, False)]) == 4.0


def test_speed_excludes_undetected():
    results = [
        make_result("a", True, 2, False),
        make_result("b", False, None, False),
    ]
    assert speed_of_detection(results) == 2.0


def test_speed_without_detections_rejected():
    with pytest.raises(NoDetections):
        speed_of_detection([make_result("a", False, None, False)])


def test_speed_fixture_hits_1_3():
    # 14 turn-1 and 6 turn-2 detections: (14 + 12) / 20 = 1.3.
    results = [make_result(f"p{i}", True, 1, False) for i in range(14)]
    results += [make_result(f"q{i}", True, 2, False) for i in range(6)]
    assert sum(r.first_turn for r in results) == 26
    assert speed_of_detection(results) == pytest.approx(1.3, abs=1e-9)


def test_top1_accuracy_examples():
    results = [make_result(f"p{i}", True, 1, i < 16) for i in range(20)]
    assert top1_accuracy(results) == 0.80
    assert top1_accuracy([make_result("a", False, None, False)]) == 0.0
    half = [make_result("a", True, 1, True), make_result("b", True, 1, False)]
    assert top1_accuracy(half) == 0.5


def test_top1_accuracy_empty_rejected():
    with pytest.raises(EmptyResults):
        top1_accuracy([])


def test_eval_result_invariants():
    with pytest.raises(ValueError):
        EvalResult(
            profile_id="p", detected=True, first_turn=None, top1_match=False,
            report=SessionReport(session_id="p", registry_version="v", status="analyzed"),
        )
    with pytest.raises(ValueError):
        EvalResult(
            profile_id="p", detected=False, first_turn=None, top1_match=True,
            report=SessionReport(session_id="p", registry_version="v", status="analyzed"),
        )


@given(
    st.lists(
        st.tuples(st.booleans(), st.booleans(), st.integers(min_value=1, max_value=8)),
        min_size=1,
        max_size=40,
    )
)
@settings(max_examples=200, deadline=None)
def test_top1_never_exceeds_detection(raw):
    results = [
        make_result(f"p{i}", detected, turn if detected else None, top1 and detected)
        for i, (detected, top1, turn) in enumerate(raw)
    ]
    assert top1_accuracy(results) <= detection_rate(results)


# --- completeness ---

def report_with_kcs(session_id: str, kcs: list[str], status: str = "analyzed") -> SessionReport:
    from gaplens.analysis import KcEvidence

    return SessionReport(
        session_id=session_id,
        registry_version="v",
        status=status,
        distinct_kcs={
            kc: KcEvidence(kc_id=kc, max_confidence=0.5, first_detected_turn=1) for kc in kcs
        },
    )


def test_exact_match_is_success():
    labels = {"d1": ["KC1", "KC2"]}
    outcomes, fraction = completeness(labels, [report_with_kcs("d1", ["KC1", "KC2"])])
    assert outcomes == {"d1": True}
    assert fraction == 1.0


def test_superset_is_success_missing_label_is_failure():
    labels = {"d1": ["KC1"], "d2": ["KC1", "KC2"]}
    reports = [
        report_with_kcs("d1", ["KC1", "KC3", "KC4", "KC5", "KC6", "KC7"]),
        report_with_kcs("d2", ["KC1", "KC3", "KC4", "KC5", "KC6", "KC7"]),
    ]
    outcomes, fraction = completeness(labels, reports)
    assert outcomes == {"d1": True, "d2": False}
    assert fraction == 0.5


def test_insufficient_report_fails_completeness():
    labels = {"d1": ["KC1"]}
    outcomes, _ = completeness(labels, [report_with_kcs("d1", [], status="insufficient")])
    assert outcomes == {"d1": False}


def test_misaligned_ids_rejected():
    labels = {"d1": ["KC1"]}
    with pytest.raises(MisalignedIds):
        completeness(labels, [report_with_kcs("d2", ["KC1"])])


def test_completeness_monotone_when_kc_set_grows():
    labels = {"d1": ["KC1", "KC2"]}
    _, small = completeness(labels, [report_with_kcs("d1", ["KC1"])])
    _, grown = completeness(labels, [report_with_kcs("d1", ["KC1", "KC2"])])
    assert grown >= small


def test_completeness_fixture_scores_19_of_20():
    transcripts, labels, script = demo.completeness_fixture()
    registry = demo.demo_registry()
    analyzer = GapAnalyzer(ScriptedProvider(script), registry)
    reports = [analyzer.analyze_session(session_from_transcript(t)) for t in transcripts]
    outcomes, fraction = completeness(labels, reports)
    assert fraction == 0.95
    failing = [d for d, ok in outcomes.items() if not ok]
    assert failing == ["d20"]
    by_id = {r.session_id: r for r in reports}
    assert by_id["d20"].status == "insufficient"


# --- run_benchmark ---

def test_single_profile_benchmark_distribution():
    registry = demo.demo_registry()
    profile = StudentProfile(
        profile_id="solo",
        group_id="g1",
        missing_kc="KC1.6.1",
        script=["my validation accuracy is high but the test set disagrees, why?"],
    )
    agent = scripted_agent(["which split did you tune on?"])
    analyzer = GapAnalyzer(
        ScriptedProvider([finding_list_reply(gap_item("KC1.6.1", 0.9, "tunes on validation"))]),
        registry,
    )
    run = run_benchmark([profile], registry, mode="scripted", agent=agent, analyzer=analyzer)
    assert run.distribution == {"KC1.6.1": 1}
    assert run.metrics["detection_rate"] == 1.0
    assert run.results[0].first_turn == 1


def test_benchmark_collects_per_profile_failures():
    registry = demo.demo_registry()
    good = StudentProfile(
        profile_id="good", group_id="g1", missing_kc="KC1.6.1",
        script=["a perfectly reasonable student question about splits"],
    )
    bad = StudentProfile(profile_id="bad", group_id="g1", missing_kc="KC1.6.1", script=None)
    agent = scripted_agent(["a probing reply?"])
    analyzer = GapAnalyzer(
        ScriptedProvider([finding_list_reply(gap_item("KC1.6.1", 0.9, "m"))]), registry
    )
    run = run_benchmark([good, bad], registry, mode="scripted", agent=agent, analyzer=analyzer)
    assert set(run.failures) == {"bad"}
    assert len(run.results) == 1


def test_canonical_benchmark_recount_oracle():
    profiles, registry, agent, analyzer = demo.build_benchmark()
    run = run_benchmark(profiles, registry, mode="scripted", agent=agent, analyzer=analyzer)

    # Independent flat recount over the emitted EvalResults.
    detected = [r for r in run.results if r.detected]
    assert run.metrics["detection_rate"] == len(detected) / len(run.results)
    assert run.metrics["top1_accuracy"] == sum(1 for r in run.results if r.top1_match) / len(
        run.results
    )
    total_turns = 0
    for result in detected:
        total_turns += result.first_turn
    assert run.metrics["speed_of_detection"] == total_turns / len(detected)

    counts: dict[str, int] = {}
    for result in run.results:
        for kc_id in result.report.distinct_kcs:
            counts[kc_id] = counts.get(kc_id, 0) + 1
    assert run.distribution == counts


def test_profiles_round_trip_through_json(tmp_path):
    from gaplens.evaluation import load_profiles

    profiles = demo.benchmark_profiles()
    path = tmp_path / "profiles.json"
    path.write_text(json.dumps([p.to_dict() for p in profiles]), encoding="utf-8")
    loaded = load_profiles(str(path))
    assert loaded == profiles


def test_forty_scripted_replies_drive_benchmark_with_zero_network(monkeypatch):
    import httpx

    def no_network(*args, **kwargs):
        raise AssertionError("benchmark must not touch the network")

    monkeypatch.setattr(httpx, "post", no_network)
    monkeypatch.setattr(httpx, "request", no_network)
    profiles, registry, agent, analyzer = demo.build_benchmark()
    assert len(agent.provider.script) == 40
    run = run_benchmark(profiles, registry, mode="scripted", agent=agent, analyzer=analyzer)
    assert run.failures == {}
    assert agent.provider.calls == 40
    assert analyzer.provider.calls == 40


def test_metrics_oracle_on_randomized_result_sets():
    rng = random.Random(20260810)
    for _ in range(100):
        size = rng.randint(1, 40)
        results = []
        for i in range(size):
            detected = rng.random() < 0.7
            results.append(
                make_result(
                    f"p{i}",
                    detected,
                    rng.randint(1, 6) if detected else None,
                    detected and rng.random() < 0.5,
                )
            )
        expected_detection = sum(1 for r in results if r.detected) / len(results)
        assert detection_rate(results) == expected_detection
        expected_top1 = sum(1 for r in results if r.top1_match) / len(results)
        assert top1_accuracy(results) == expected_top1
        assert top1_accuracy(results) <= detection_rate(results)
        turns = [r.first_turn for r in results if r.detected]
        if turns:
            assert speed_of_detection(results) == sum(turns) / len(turns)
