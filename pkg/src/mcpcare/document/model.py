"""Document model: typed records, strict parsing, canonical serialization.

Documents are immutable values by convention: every mutation path goes
through tree rebuilds (see lifecycle.new_version), never in-place edits.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any

from mcpcare.errors import MalformedDocument, SchemaViolation, UnsupportedSchemaVersion
from mcpcare.jsoncanon import ZERO_DIGEST, canonical_bytes, format_timestamp, parse_timestamp

SCHEMA_VERSION = "mcp/1"
FILE_EXTENSION = ".mcp.json"
DOCUMENT_ID_PATTERN = re.compile(r"^MCP-[A-Z0-9]+-[0-9]+$")
# Entity ids land in ledger detail strings and file names; keep them inert.
ENTITY_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")
HEX_DIGEST_PATTERN = re.compile(r"^[0-9a-f]{64}$")

Scalar = str | int | float


class Source(str, Enum):
    EHR = "ehr"
    SENSOR = "sensor"
    SELF_REPORT = "self_report"
    CLINICIAN = "clinician"


class Priority(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class ObjectiveStatus(str, Enum):
    OPEN = "open"
    MET = "met"
    ABANDONED = "abandoned"


class HypothesisStatus(str, Enum):
    PROVISIONAL = "provisional"
    CONFIRMED = "confirmed"
    REJECTED = "rejected"


class TaskKind(str, Enum):
    LAB_ORDER = "lab_order"
    REFERRAL = "referral"
    FOLLOW_UP = "follow_up"
    MEDICATION_CHANGE = "medication_change"
    EVALUATION = "evaluation"
    HANDOFF = "handoff"


class TaskState(str, Enum):
    DRAFT = "draft"
    PROPOSED = "proposed"
    PENDING_VERIFICATION = "pending_verification"
    APPROVED = "approved"
    REJECTED = "rejected"
    EXECUTING = "executing"
    COMPLETED = "completed"
    FAILED = "failed"
    FALLBACK_ACTIVATED = "fallback_activated"


class DecisionKind(str, Enum):
    APPROVE = "approve"
    MODIFY = "modify"
    REJECT = "reject"


REQUIRED_PAYLOAD_KEYS: dict[TaskKind, tuple[str, ...]] = {
    TaskKind.LAB_ORDER: ("test_code", "reason"),
    TaskKind.REFERRAL: ("specialty", "reason"),
    TaskKind.FOLLOW_UP: ("due_in_days", "procedure"),
    TaskKind.MEDICATION_CHANGE: ("drug", "change", "reason"),
    TaskKind.EVALUATION: ("instrument",),
    TaskKind.HANDOFF: ("to_provider",),
}

LEGAL_TRANSITIONS: frozenset[tuple[TaskState, TaskState]] = frozenset(
    {
        (TaskState.DRAFT, TaskState.PROPOSED),
        (TaskState.PROPOSED, TaskState.PENDING_VERIFICATION),
        (TaskState.PENDING_VERIFICATION, TaskState.APPROVED),
        (TaskState.PENDING_VERIFICATION, TaskState.REJECTED),
        (TaskState.APPROVED, TaskState.EXECUTING),
        (TaskState.EXECUTING, TaskState.COMPLETED),
        (TaskState.EXECUTING, TaskState.FAILED),
        (TaskState.FAILED, TaskState.FALLBACK_ACTIVATED),
        (TaskState.REJECTED, TaskState.FALLBACK_ACTIVATED),
    }
)

TERMINAL_STATES: frozenset[TaskState] = frozenset(
    {TaskState.COMPLETED, TaskState.FAILED, TaskState.REJECTED, TaskState.FALLBACK_ACTIVATED}
)


@dataclass
class Header:
    schema_version: str
    id: str
    version: int
    created_at: datetime
    parent_hash: str

    def to_tree(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "id": self.id,
            "version": self.version,
            "created_at": format_timestamp(self.created_at),
            "parent_hash": self.parent_hash,
        }


@dataclass
class Observation:
    code: str
    value: Scalar
    unit: str
    source: Source
    timestamp: datetime

    def to_tree(self) -> dict[str, Any]:
        return {
            "code": self.code,
            "value": self.value,
            "unit": self.unit,
            "source": self.source.value,
            "timestamp": format_timestamp(self.timestamp),
        }


@dataclass
class HistoryNote:
    timestamp: datetime
    category: str
    text: str

    def to_tree(self) -> dict[str, Any]:
        return {
            "timestamp": format_timestamp(self.timestamp),
            "category": self.category,
            "text": self.text,
        }


@dataclass
class Objective:
    id: str
    description: str
    priority: Priority
    status: ObjectiveStatus

    def to_tree(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "description": self.description,
            "priority": self.priority.value,
            "status": self.status.value,
        }


@dataclass
class Hypothesis:
    id: str
    condition_code: str
    narrative: str
    confidence: float
    status: HypothesisStatus
    evidence_refs: list[int] = field(default_factory=list)

    def to_tree(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "condition_code": self.condition_code,
            "narrative": self.narrative,
            "confidence": self.confidence,
            "status": self.status.value,
            "evidence_refs": list(self.evidence_refs),
        }


@dataclass
class TaskSpec:
    id: str
    kind: TaskKind
    payload: dict[str, Scalar]
    state: TaskState
    confidence: float
    requires_approval: bool
    depends_on: list[str] = field(default_factory=list)
    fallback_task: str | None = None

    def to_tree(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "payload": dict(self.payload),
            "state": self.state.value,
            "confidence": self.confidence,
            "requires_approval": self.requires_approval,
            "depends_on": list(self.depends_on),
            "fallback_task": self.fallback_task,
        }


@dataclass
class ReasoningEntry:
    timestamp: datetime
    module_id: str
    action: str
    rationale: str
    confidence: float
    input_digest: str

    def to_tree(self) -> dict[str, Any]:
        return {
            "timestamp": format_timestamp(self.timestamp),
            "module_id": self.module_id,
            "action": self.action,
            "rationale": self.rationale,
            "confidence": self.confidence,
            "input_digest": self.input_digest,
        }


@dataclass
class VerificationRecord:
    timestamp: datetime
    actor: str
    task_id: str
    decision: DecisionKind
    note: str
    modification: dict[str, Scalar] | None = None

    def to_tree(self) -> dict[str, Any]:
        return {
            "timestamp": format_timestamp(self.timestamp),
            "actor": self.actor,
            "task_id": self.task_id,
            "decision": self.decision.value,
            "note": self.note,
            "modification": dict(self.modification) if self.modification is not None else None,
        }


@dataclass
class McpDocument:
    header: Header
    demographics: dict[str, str]
    observations: list[Observation]
    history_notes: list[HistoryNote]
    objectives: list[Objective]
    hypotheses: list[Hypothesis]
    task_plan: list[TaskSpec]
    reasoning_log: list[ReasoningEntry]
    verification: list[VerificationRecord]

    def to_tree(self) -> dict[str, Any]:
        return {
            "header": self.header.to_tree(),
            "demographics": dict(self.demographics),
            "observations": [o.to_tree() for o in self.observations],
            "history_notes": [n.to_tree() for n in self.history_notes],
            "objectives": [o.to_tree() for o in self.objectives],
            "hypotheses": [h.to_tree() for h in self.hypotheses],
            "task_plan": [t.to_tree() for t in self.task_plan],
            "reasoning_log": [r.to_tree() for r in self.reasoning_log],
            "verification": [v.to_tree() for v in self.verification],
        }

    @classmethod
    def from_tree(cls, tree: Any) -> McpDocument:
        return _document_from_tree(tree)

    # -- lookup helpers -------------------------------------------------

    def task(self, task_id: str) -> TaskSpec | None:
        for t in self.task_plan:
            if t.id == task_id:
                return t
        return None

    def hypothesis(self, hypothesis_id: str) -> Hypothesis | None:
        for h in self.hypotheses:
            if h.id == hypothesis_id:
                return h
        return None

    def latest_observation(self, code: str) -> Observation | None:
        best: Observation | None = None
        for o in self.observations:
            if o.code == code and (best is None or o.timestamp >= best.timestamp):
                best = o
        return best

    def task_states(self) -> dict[str, TaskState]:
        return {t.id: t.state for t in self.task_plan}


def serialize_document(doc: McpDocument) -> bytes:
    """Canonical bytes of a document; equal documents serialize identically."""
    return canonical_bytes(doc.to_tree())


def parse_document(data: bytes | str) -> McpDocument:
    """Parse raw bytes into a document, enforcing the structural schema."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not UTF-8: {exc}") from None
    try:
        tree = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"not JSON: {exc}") from None
    return _document_from_tree(tree)


# -- strict tree decoding ----------------------------------------------------


def _fail(path: str, rule: str, message: str = "") -> SchemaViolation:
    return SchemaViolation(path, rule, message)


def _expect_object(value: Any, path: str, keys: tuple[str, ...]) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise _fail(path, "type", "expected object")
    unknown = set(value) - set(keys)
    if unknown:
        raise _fail(f"{path}/{sorted(unknown)[0]}", "unknown_field")
    missing = [k for k in keys if k not in value]
    if missing:
        raise _fail(f"{path}/{missing[0]}", "missing_field")
    return value


def _expect_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise _fail(path, "type", "expected string")
    return value


def _expect_int(value: Any, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise _fail(path, "type", "expected integer")
    return value


def _expect_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise _fail(path, "type", "expected boolean")
    return value


def _expect_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(path, "type", "expected number")
    return float(value)


def _expect_scalar(value: Any, path: str) -> Scalar:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise _fail(path, "type", "expected string or number")
    return value


def _expect_list(value: Any, path: str) -> list[Any]:
    if not isinstance(value, list):
        raise _fail(path, "type", "expected array")
    return value


def _expect_timestamp(value: Any, path: str) -> datetime:
    text = _expect_str(value, path)
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise _fail(path, "timestamp", str(exc)) from None


def _expect_enum(value: Any, path: str, enum_cls: type) -> Any:
    text = _expect_str(value, path)
    try:
        return enum_cls(text)
    except ValueError:
        raise _fail(path, "enum", f"{text!r} not in {enum_cls.__name__}") from None


def _expect_entity_id(value: Any, path: str) -> str:
    text = _expect_str(value, path)
    if not ENTITY_ID_PATTERN.match(text):
        raise _fail(path, "id_format", text)
    return text


def _header_from_tree(tree: Any) -> Header:
    t = _expect_object(tree, "header", ("schema_version", "id", "version", "created_at", "parent_hash"))
    schema_version = _expect_str(t["schema_version"], "header/schema_version")
    if schema_version != SCHEMA_VERSION:
        raise UnsupportedSchemaVersion(schema_version)
    doc_id = _expect_str(t["id"], "header/id")
    if not DOCUMENT_ID_PATTERN.match(doc_id):
        raise _fail("header/id", "id_format", doc_id)
    version = _expect_int(t["version"], "header/version")
    created_at = _expect_timestamp(t["created_at"], "header/created_at")
    parent_hash = _expect_str(t["parent_hash"], "header/parent_hash")
    if not HEX_DIGEST_PATTERN.match(parent_hash) and parent_hash != ZERO_DIGEST:
        raise _fail("header/parent_hash", "digest_format", parent_hash)
    return Header(schema_version, doc_id, version, created_at, parent_hash)


def _observation_from_tree(tree: Any, path: str) -> Observation:
    t = _expect_object(tree, path, ("code", "value", "unit", "source", "timestamp"))
    return Observation(
        code=_expect_str(t["code"], f"{path}/code"),
        value=_expect_scalar(t["value"], f"{path}/value"),
        unit=_expect_str(t["unit"], f"{path}/unit"),
        source=_expect_enum(t["source"], f"{path}/source", Source),
        timestamp=_expect_timestamp(t["timestamp"], f"{path}/timestamp"),
    )


def _note_from_tree(tree: Any, path: str) -> HistoryNote:
    t = _expect_object(tree, path, ("timestamp", "category", "text"))
    return HistoryNote(
        timestamp=_expect_timestamp(t["timestamp"], f"{path}/timestamp"),
        category=_expect_str(t["category"], f"{path}/category"),
        text=_expect_str(t["text"], f"{path}/text"),
    )


def _objective_from_tree(tree: Any, path: str) -> Objective:
    t = _expect_object(tree, path, ("id", "description", "priority", "status"))
    return Objective(
        id=_expect_entity_id(t["id"], f"{path}/id"),
        description=_expect_str(t["description"], f"{path}/description"),
        priority=_expect_enum(t["priority"], f"{path}/priority", Priority),
        status=_expect_enum(t["status"], f"{path}/status", ObjectiveStatus),
    )


def _hypothesis_from_tree(tree: Any, path: str) -> Hypothesis:
    t = _expect_object(tree, path, ("id", "condition_code", "narrative", "confidence", "status", "evidence_refs"))
    refs = [_expect_int(v, f"{path}/evidence_refs/{i}") for i, v in enumerate(_expect_list(t["evidence_refs"], f"{path}/evidence_refs"))]
    return Hypothesis(
        id=_expect_entity_id(t["id"], f"{path}/id"),
        condition_code=_expect_str(t["condition_code"], f"{path}/condition_code"),
        narrative=_expect_str(t["narrative"], f"{path}/narrative"),
        confidence=_expect_number(t["confidence"], f"{path}/confidence"),
        status=_expect_enum(t["status"], f"{path}/status", HypothesisStatus),
        evidence_refs=refs,
    )


def _task_from_tree(tree: Any, path: str) -> TaskSpec:
    t = _expect_object(
        tree, path,
        ("id", "kind", "payload", "state", "confidence", "requires_approval", "depends_on", "fallback_task"),
    )
    payload_tree = t["payload"]
    if not isinstance(payload_tree, dict):
        raise _fail(f"{path}/payload", "type", "expected object")
    payload = {
        _expect_str(k, f"{path}/payload"): _expect_scalar(v, f"{path}/payload/{k}")
        for k, v in payload_tree.items()
    }
    deps = [_expect_entity_id(v, f"{path}/depends_on/{i}") for i, v in enumerate(_expect_list(t["depends_on"], f"{path}/depends_on"))]
    fallback = t["fallback_task"]
    if fallback is not None:
        fallback = _expect_entity_id(fallback, f"{path}/fallback_task")
    return TaskSpec(
        id=_expect_entity_id(t["id"], f"{path}/id"),
        kind=_expect_enum(t["kind"], f"{path}/kind", TaskKind),
        payload=payload,
        state=_expect_enum(t["state"], f"{path}/state", TaskState),
        confidence=_expect_number(t["confidence"], f"{path}/confidence"),
        requires_approval=_expect_bool(t["requires_approval"], f"{path}/requires_approval"),
        depends_on=deps,
        fallback_task=fallback,
    )


def _reasoning_from_tree(tree: Any, path: str) -> ReasoningEntry:
    t = _expect_object(tree, path, ("timestamp", "module_id", "action", "rationale", "confidence", "input_digest"))
    return ReasoningEntry(
        timestamp=_expect_timestamp(t["timestamp"], f"{path}/timestamp"),
        module_id=_expect_str(t["module_id"], f"{path}/module_id"),
        action=_expect_str(t["action"], f"{path}/action"),
        rationale=_expect_str(t["rationale"], f"{path}/rationale"),
        confidence=_expect_number(t["confidence"], f"{path}/confidence"),
        input_digest=_expect_str(t["input_digest"], f"{path}/input_digest"),
    )


def _verification_from_tree(tree: Any, path: str) -> VerificationRecord:
    t = _expect_object(tree, path, ("timestamp", "actor", "task_id", "decision", "note", "modification"))
    modification = t["modification"]
    if modification is not None:
        if not isinstance(modification, dict):
            raise _fail(f"{path}/modification", "type", "expected object or null")
        modification = {
            _expect_str(k, f"{path}/modification"): _expect_scalar(v, f"{path}/modification/{k}")
            for k, v in modification.items()
        }
    return VerificationRecord(
        timestamp=_expect_timestamp(t["timestamp"], f"{path}/timestamp"),
        actor=_expect_str(t["actor"], f"{path}/actor"),
        task_id=_expect_entity_id(t["task_id"], f"{path}/task_id"),
        decision=_expect_enum(t["decision"], f"{path}/decision", DecisionKind),
        note=_expect_str(t["note"], f"{path}/note"),
        modification=modification,
    )


_TOP_KEYS = (
    "header", "demographics", "observations", "history_notes", "objectives",
    "hypotheses", "task_plan", "reasoning_log", "verification",
)


def _document_from_tree(tree: Any) -> McpDocument:
    if not isinstance(tree, dict):
        raise MalformedDocument("top level is not an object")
    _expect_object(tree, "", _TOP_KEYS)
    header = _header_from_tree(tree["header"])
    demographics_tree = tree["demographics"]
    if not isinstance(demographics_tree, dict):
        raise _fail("demographics", "type", "expected object")
    demographics = {
        _expect_str(k, "demographics"): _expect_str(v, f"demographics/{k}")
        for k, v in demographics_tree.items()
    }
    observations = [
        _observation_from_tree(v, f"observations/{i}")
        for i, v in enumerate(_expect_list(tree["observations"], "observations"))
    ]
    history_notes = [
        _note_from_tree(v, f"history_notes/{i}")
        for i, v in enumerate(_expect_list(tree["history_notes"], "history_notes"))
    ]
    objectives = [
        _objective_from_tree(v, f"objectives/{i}")
        for i, v in enumerate(_expect_list(tree["objectives"], "objectives"))
    ]
    hypotheses = [
        _hypothesis_from_tree(v, f"hypotheses/{i}")
        for i, v in enumerate(_expect_list(tree["hypotheses"], "hypotheses"))
    ]
    task_plan = [
        _task_from_tree(v, f"task_plan/{i}")
        for i, v in enumerate(_expect_list(tree["task_plan"], "task_plan"))
    ]
    reasoning_log = [
        _reasoning_from_tree(v, f"reasoning_log/{i}")
        for i, v in enumerate(_expect_list(tree["reasoning_log"], "reasoning_log"))
    ]
    verification = [
        _verification_from_tree(v, f"verification/{i}")
        for i, v in enumerate(_expect_list(tree["verification"], "verification"))
    ]
    return McpDocument(
        header=header,
        demographics=demographics,
        observations=observations,
        history_notes=history_notes,
        objectives=objectives,
        hypotheses=hypotheses,
        task_plan=task_plan,
        reasoning_log=reasoning_log,
        verification=verification,
    )
