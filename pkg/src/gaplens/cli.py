"""Command-line interface.

Subcommands: serve, ingest, validate-kc, analyze, simulate, report.
Successful runs exit 0 and print JSON results to stdout; failures exit
nonzero with a machine-parseable {"error", "message"} object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import demo
from .aggregate import GapAggregator
from .analysis import GapAnalyzer
from .errors import GaplensError
from .evaluation import completeness, load_profiles, run_benchmark
from .events import read_events
from .gateway import ENV_MODEL, ENV_PROVIDER_URL, HttpProvider, ScriptedProvider, config_from_env
from .kc import load_kc_list
from .retrieval import DEFAULT_CHUNK_CHARS, DEFAULT_OVERLAP_CHARS, ingest_corpus_dir
from .service import ENV_INSTRUCTOR_TOKEN, ServiceState, create_app, replay

DEFAULT_LOG_PATH = "gaplens-events.ndjson"


def _fail(error: str, message: str) -> int:
    print(json.dumps({"error": error, "message": message}), file=sys.stderr)
    return 1


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2))


def _load_registry(args):
    if args.kc_list:
        return load_kc_list(args.kc_list)
    if args.demo:
        return demo.demo_registry()
    raise GaplensError("--kc-list is required (or pass --demo)")


def _http_provider(args) -> HttpProvider:
    if args.provider:
        os.environ[ENV_PROVIDER_URL] = args.provider
    if not os.environ.get(ENV_PROVIDER_URL) or not os.environ.get(ENV_MODEL):
        raise GaplensError(
            f"set --provider plus {ENV_MODEL}, or {ENV_PROVIDER_URL} and {ENV_MODEL}, "
            "or pass --demo for the scripted offline mode"
        )
    return HttpProvider(config_from_env())


def cmd_validate_kc(args) -> int:
    registry = load_kc_list(args.kc_list)
    _emit(
        {
            "ok": True,
            "course_id": registry.course_id,
            "components": len(registry),
            "version": registry.version,
        }
    )
    return 0


def cmd_ingest(args) -> int:
    index = ingest_corpus_dir(args.corpus, args.chunk_chars, args.overlap_chars)
    by_doc: dict[str, int] = {}
    for chunk in index.chunks:
        by_doc[chunk.doc_id] = by_doc.get(chunk.doc_id, 0) + 1
    if args.out:
        dump = [
            {"doc_id": c.doc_id, "seq": c.seq, "chars": len(c.text)} for c in index.chunks
        ]
        Path(args.out).write_text(json.dumps(dump, indent=2), encoding="utf-8")
    _emit({"ok": True, "documents": len(by_doc), "chunks": len(index), "per_doc": by_doc})
    return 0


def cmd_analyze(args) -> int:
    from .evaluation import session_from_transcript

    if args.demo and not args.transcripts:
        transcripts, labels, script = demo.completeness_fixture()
        registry = demo.demo_registry()
        provider = ScriptedProvider(script)
    else:
        if not args.transcripts:
            raise GaplensError("--transcripts is required unless --demo runs the built-in fixture")
        registry = _load_registry(args)
        with open(args.transcripts, encoding="utf-8") as fh:
            transcripts = json.load(fh)
        labels = None
        if args.labels:
            with open(args.labels, encoding="utf-8") as fh:
                labels = json.load(fh)
        if args.script:
            with open(args.script, encoding="utf-8") as fh:
                provider = ScriptedProvider(json.load(fh))
        else:
            provider = _http_provider(args)

    analyzer = GapAnalyzer(provider=provider, registry=registry)
    reports = []
    for transcript in transcripts:
        session = session_from_transcript(transcript, course_id=registry.course_id)
        reports.append(analyzer.analyze_session(session))

    payload: dict = {"reports": [r.to_dict() for r in reports]}
    if labels:
        outcomes, fraction = completeness(labels, reports)
        payload["completeness"] = {"per_dialogue": outcomes, "fraction": fraction}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    _emit(payload if args.verbose else _analyze_summary(payload))
    return 0


def _analyze_summary(payload: dict) -> dict:
    summary = {
        "dialogues": len(payload["reports"]),
        "insufficient": sum(1 for r in payload["reports"] if r["status"] == "insufficient"),
    }
    if "completeness" in payload:
        summary["completeness"] = payload["completeness"]["fraction"]
    return summary


def cmd_simulate(args) -> int:
    if args.demo and not args.profiles:
        profiles, registry, agent, analyzer = demo.build_benchmark()
    else:
        if not (args.profiles and args.kc_list):
            raise GaplensError("--profiles and --kc-list are required unless --demo")
        registry = load_kc_list(args.kc_list)
        profiles = load_profiles(args.profiles)
        from .dialogue import DialogueAgent

        if args.script:
            with open(args.script, encoding="utf-8") as fh:
                scripts = json.load(fh)
            dialogue_provider = ScriptedProvider(scripts["dialogue"])
            analysis_provider = ScriptedProvider(scripts["analysis"])
        else:
            dialogue_provider = _http_provider(args)
            analysis_provider = _http_provider(args)
        index = ingest_corpus_dir(args.corpus) if args.corpus else None
        agent = DialogueAgent(
            provider=dialogue_provider, index=index, course_id=registry.course_id
        )
        analyzer = GapAnalyzer(provider=analysis_provider, registry=registry)

    mode = "scripted" if (args.demo or args.script) else "model-driven"
    run = run_benchmark(profiles, registry, mode=mode, agent=agent, analyzer=analyzer)
    if args.csv:
        Path(args.csv).write_text(run.frequency_report.to_csv(), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(run.metrics_json(), encoding="utf-8")
    print(run.metrics_json())
    return 0


def cmd_report(args) -> int:
    registry = _load_registry(args)
    events = read_events(args.log_path)
    aggregator = GapAggregator(course_id=registry.course_id, registry_version=registry.version)
    stored: dict[str, dict] = {}
    from .analysis import SessionReport
    from .errors import StaleRegistry

    for event in events:
        if event.kind == "report_stored":
            stored[event.payload["session_id"]] = event.payload["report"]
        elif event.kind == "aggregate_recorded":
            report = SessionReport.from_dict(stored[event.payload["session_id"]])
            try:
                aggregator.record(report, recorded_at=event.payload["recorded_at"])
            except StaleRegistry:
                continue
    report = aggregator.top_n(args.top)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    _emit(report.to_dict())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    registry = _load_registry(args)
    if args.corpus:
        index = ingest_corpus_dir(args.corpus)
    elif args.demo:
        index = demo.demo_index()
    else:
        index = None

    if args.demo:
        dialogue_script, analysis_script = demo.demo_chat_scripts()
        dialogue_provider = ScriptedProvider(dialogue_script, cycle=True)
        analysis_provider = ScriptedProvider(analysis_script, cycle=True)
        token = os.environ.get(ENV_INSTRUCTOR_TOKEN, "demo")
    else:
        dialogue_provider = _http_provider(args)
        analysis_provider = _http_provider(args)
        token = os.environ.get(ENV_INSTRUCTOR_TOKEN)

    log_path = Path(args.log_path)
    if log_path.exists():
        state = replay(
            log_path,
            registry,
            index,
            dialogue_provider,
            analysis_provider,
            allow_partial_tail=True,
            instructor_token=token,
        )
    else:
        state = ServiceState(
            registry=registry,
            index=index,
            dialogue_provider=dialogue_provider,
            analysis_provider=analysis_provider,
            log_path=log_path,
            instructor_token=token,
        )
    app = create_app(state, workers=args.workers, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaplens",
        description="Tutoring chat service that surfaces class-wide knowledge gaps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--kc-list", help="KC list JSON file")
        p.add_argument("--demo", action="store_true", help="offline demo mode (scripted provider)")
        p.add_argument("--provider", help=f"chat-completion endpoint URL (else {ENV_PROVIDER_URL})")

    p = sub.add_parser("validate-kc", help="lint a KC list file")
    p.add_argument("--kc-list", required=True)
    p.set_defaults(func=cmd_validate_kc)

    p = sub.add_parser("ingest", help="chunk a course-material directory")
    p.add_argument("--corpus", required=True, help="directory of UTF-8 text files")
    p.add_argument("--chunk-chars", type=int, default=DEFAULT_CHUNK_CHARS)
    p.add_argument("--overlap-chars", type=int, default=DEFAULT_OVERLAP_CHARS)
    p.add_argument("--out", help="write chunk inventory JSON here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="analyze transcript dialogues for knowledge gaps")
    common(p)
    p.add_argument("--transcripts", help="JSON list of {dialogue_id, messages}")
    p.add_argument("--labels", help="JSON {dialogue_id: [kc_id, ...]} for completeness scoring")
    p.add_argument("--script", help="JSON list of scripted analysis replies (offline run)")
    p.add_argument("--out", help="write full reports JSON here")
    p.add_argument("--verbose", action="store_true", help="print full reports, not the summary")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run the simulated-student benchmark")
    common(p)
    p.add_argument("--profiles", help="JSON list of student profiles")
    p.add_argument("--corpus", help="course-material directory for the tutor")
    p.add_argument("--script", help='JSON {"dialogue": [...], "analysis": [...]} provider scripts')
    p.add_argument("--json", help="write the metrics blob here")
    p.add_argument("--csv", help="write the distribution CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="export the top-n frequency report from an event log")
    common(p)
    p.add_argument("--log-path", default=DEFAULT_LOG_PATH)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--csv", help="write kc_id,count CSV here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    common(p)
    p.add_argument("--corpus", help="course-material directory")
    p.add_argument("--log-path", default=DEFAULT_LOG_PATH)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--workers", type=int, default=1, help="analysis worker threads")
    p.add_argument("--ui", help="directory of built frontend assets to mount at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GaplensError as exc:
        return _fail(type(exc).__name__, str(exc))
    except FileNotFoundError as exc:
        return _fail("FileNotFound", str(exc))


if __name__ == "__main__":
    sys.exit(main())
