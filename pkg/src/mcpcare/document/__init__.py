"""Versioned clinical context documents: model, validation, diff, versioning."""
from mcpcare.document.changes import ChangeEntry, ChangeSet, apply_changeset, diff
from mcpcare.document.lifecycle import (
    RedactionPolicy,
    document_hash,
    new_document,
    new_version,
    redact,
)
from mcpcare.document.model import (
    DOCUMENT_ID_PATTERN,
    FILE_EXTENSION,
    LEGAL_TRANSITIONS,
    REQUIRED_PAYLOAD_KEYS,
    SCHEMA_VERSION,
    TERMINAL_STATES,
    DecisionKind,
    Header,
    HistoryNote,
    Hypothesis,
    HypothesisStatus,
    McpDocument,
    Objective,
    ObjectiveStatus,
    Observation,
    Priority,
    ReasoningEntry,
    Source,
    TaskKind,
    TaskSpec,
    TaskState,
    VerificationRecord,
    parse_document,
    serialize_document,
)
from mcpcare.document.validate import Violation, validate

__all__ = [
    "ChangeEntry",
    "ChangeSet",
    "DecisionKind",
    "DOCUMENT_ID_PATTERN",
    "FILE_EXTENSION",
    "Header",
    "HistoryNote",
    "Hypothesis",
    "HypothesisStatus",
    "LEGAL_TRANSITIONS",
    "McpDocument",
    "Objective",
    "ObjectiveStatus",
    "Observation",
    "Priority",
    "ReasoningEntry",
    "REQUIRED_PAYLOAD_KEYS",
    "RedactionPolicy",
    "SCHEMA_VERSION",
    "Source",
    "TaskKind",
    "TaskSpec",
    "TaskState",
    "TERMINAL_STATES",
    "VerificationRecord",
    "Violation",
    "apply_changeset",
    "diff",
    "document_hash",
    "new_document",
    "new_version",
    "parse_document",
    "redact",
    "serialize_document",
    "validate",
]
