"""Exception types shared across the package.

Every error that callers are expected to catch lives here so that the CLI
and the HTTP layer can map them to machine-readable payloads in one place.
"""


class GaplensError(Exception):
    """Base class for all package-specific errors."""


# --- knowledge-component registry ---

class MalformedDocument(GaplensError):
    """KC list document is syntactically invalid or violates the id grammar."""


class DuplicateId(GaplensError):
    """Two components in a KC list declare the same id."""


class OrphanParent(GaplensError):
    """A component of depth > 1 whose prefix parent is not declared."""


class EmptyRegistry(GaplensError):
    """KC list declares no components."""


class KcNotFound(GaplensError):
    """Lookup of an id that is not declared in the registry."""


# --- model gateway ---

class TransportError(GaplensError):
    """Network failure or timeout after the configured retries."""


class ProviderRejection(GaplensError):
    """Provider answered with a non-2xx status."""

    def __init__(self, status_code: int, body: str = ""):
        super().__init__(f"provider rejected request with status {status_code}")
        self.status_code = status_code
        self.body = body


class SchemaViolation(GaplensError):
    """Reply did not parse against the requested schema, even after repair."""


class ScriptExhausted(GaplensError):
    """Scripted provider was called more times than it has replies."""


# --- dialogue agent ---

class EmptyCorpus(GaplensError):
    """Course-material ingestion received no usable documents."""


class RespondFailed(GaplensError):
    """Gateway failure while producing a tutor reply; user message kept."""


# --- gap analysis ---

class AnalysisFailed(GaplensError):
    """A turn-pair analysis could not produce a valid finding list."""


# --- aggregation ---

class StaleRegistry(GaplensError):
    """Session report was produced against a different registry version."""

    def __init__(self, report_version: str, aggregator_version: str):
        super().__init__(
            "report registry version "
            f"{report_version!r} != aggregator version {aggregator_version!r}"
        )
        self.report_version = report_version
        self.aggregator_version = aggregator_version


# --- evaluation harness ---

class EmptyResults(GaplensError):
    """Metric requested over an empty result list."""


class NoDetections(GaplensError):
    """Speed-of-detection requested but no conversation detected its gap."""


class MisalignedIds(GaplensError):
    """Label file and report list do not cover the same dialogue ids."""


# --- service / persistence ---

class CorruptEvent(GaplensError):
    """Event log entry could not be decoded; replay halts at this seq."""

    def __init__(self, seq: int, reason: str):
        super().__init__(f"corrupt event at seq {seq}: {reason}")
        self.seq = seq
        self.reason = reason
