"""Read models the gateway serves: the physician verification queue."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from mcpcare.document.model import McpDocument, TaskState


@dataclass(frozen=True)
class QueueItem:
    document_id: str
    task_id: str
    kind: str
    payload: dict[str, Any]
    confidence: float
    requires_approval: bool
    rationale: str
    flags: tuple[str, ...]

    def to_tree(self) -> dict[str, Any]:
        return {
            "document_id": self.document_id,
            "task_id": self.task_id,
            "kind": self.kind,
            "payload": dict(self.payload),
            "confidence": self.confidence,
            "requires_approval": self.requires_approval,
            "rationale": self.rationale,
            "flags": list(self.flags),
        }


def _action_fields(action: str, verb: str) -> dict[str, str] | None:
    tokens = action.split()
    if not tokens or tokens[0] != verb:
        return None
    fields: dict[str, str] = {}
    for token in tokens[1:]:
        key, sep, value = token.partition("=")
        if sep:
            fields[key] = value
    return fields


def task_rationales(doc: McpDocument) -> dict[str, str]:
    """Latest proposing rationale per task id, recovered from the reasoning log."""
    out: dict[str, str] = {}
    for entry in doc.reasoning_log:
        fields = _action_fields(entry.action, "propose")
        if fields is None:
            continue
        for task_id in fields.get("tasks", "").split(","):
            if task_id:
                out[task_id] = entry.rationale
    return out


def task_flags(doc: McpDocument) -> dict[str, tuple[str, ...]]:
    """Latest rule flags per target id (``rule:flag`` pairs, passes omitted)."""
    out: dict[str, tuple[str, ...]] = {}
    for entry in doc.reasoning_log:
        fields = _action_fields(entry.action, "validate")
        if fields is None or "target" not in fields:
            continue
        flags = tuple(
            part.strip()
            for part in entry.rationale.split(";")
            if ":" in part
        )
        out[fields["target"]] = flags
    return out


def pending_queue(doc: McpDocument) -> list[QueueItem]:
    rationales = task_rationales(doc)
    flags = task_flags(doc)
    return [
        QueueItem(
            document_id=doc.header.id,
            task_id=task.id,
            kind=task.kind.value,
            payload=dict(task.payload),
            confidence=task.confidence,
            requires_approval=task.requires_approval,
            rationale=rationales.get(task.id, ""),
            flags=flags.get(task.id, ()),
        )
        for task in doc.task_plan
        if task.state is TaskState.PENDING_VERIFICATION
    ]
