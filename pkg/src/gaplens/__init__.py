"""gaplens: tutoring chat that mines student-AI dialogues for knowledge gaps.

The package is a pipeline of small pieces:

- kc: the knowledge-component registry, the shared gap vocabulary
- gateway: the only module that talks to a model provider
- retrieval + dialogue: the student-facing, course-grounded tutor
- analysis: per-turn gap identification against the registry
- aggregate: class-wide frequency table for instructors
- evaluation + demo: offline simulated-student benchmark and metrics
- events + service + cli: persistence, HTTP API, and the gaplens command
"""

from .aggregate import FrequencyEntry, FrequencyReport, GapAggregator
from .analysis import (
    FINDING_LIST_SCHEMA,
    GapAnalyzer,
    GapFinding,
    KcEvidence,
    SessionReport,
    top_kc,
)
from .dialogue import DialogueAgent, DialogueSession, SessionStore, TurnPair, turn_pairs
from .evaluation import (
    BenchmarkRun,
    EvalResult,
    StudentProfile,
    completeness,
    detection_rate,
    run_benchmark,
    simulate_dialogue,
    speed_of_detection,
    top1_accuracy,
)
from .gateway import (
    ChatMessage,
    CompletionRequest,
    HttpProvider,
    ProviderConfig,
    ScriptedProvider,
    complete,
    scripted_provider,
)
from .kc import (
    KcRegistry,
    KnowledgeComponent,
    load_kc_list,
    lookup,
    parse_kc_list,
    render_for_prompt,
    serialize_kc_list,
)
from .retrieval import ChunkIndex, CourseChunk, ingest_course_material, retrieve

__version__ = "0.1.0"

__all__ = [
    "BenchmarkRun",
    "ChatMessage",
    "ChunkIndex",
    "CompletionRequest",
    "CourseChunk",
    "DialogueAgent",
    "DialogueSession",
    "EvalResult",
    "FINDING_LIST_SCHEMA",
    "FrequencyEntry",
    "FrequencyReport",
    "GapAggregator",
    "GapAnalyzer",
    "GapFinding",
    "HttpProvider",
    "KcEvidence",
    "KcRegistry",
    "KnowledgeComponent",
    "ProviderConfig",
    "ScriptedProvider",
    "SessionReport",
    "SessionStore",
    "StudentProfile",
    "TurnPair",
    "complete",
    "completeness",
    "detection_rate",
    "ingest_course_material",
    "load_kc_list",
    "lookup",
    "parse_kc_list",
    "render_for_prompt",
    "retrieve",
    "run_benchmark",
    "scripted_provider",
    "serialize_kc_list",
    "simulate_dialogue",
    "speed_of_detection",
    "top1_accuracy",
    "top_kc",
    "turn_pairs",
]
