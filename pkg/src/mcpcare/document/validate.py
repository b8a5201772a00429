"""Semantic validation: cross-field invariants over a structurally sound document."""
from __future__ import annotations

from dataclasses import dataclass

from mcpcare.document.model import (
    HEX_DIGEST_PATTERN,
    REQUIRED_PAYLOAD_KEYS,
    McpDocument,
    TaskKind,
)
from mcpcare.jsoncanon import ZERO_DIGEST


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    message: str = ""


def validate(doc: McpDocument) -> list[Violation]:
    """Return every broken invariant in deterministic traversal order."""
    out: list[Violation] = []

    if doc.header.version < 1:
        out.append(Violation("header/version", "version_positive", str(doc.header.version)))
    is_zero = doc.header.parent_hash == ZERO_DIGEST
    if doc.header.version == 1 and not is_zero:
        out.append(Violation("header/parent_hash", "genesis_parent_zero"))
    if doc.header.version > 1 and is_zero:
        out.append(Violation("header/parent_hash", "parent_required"))

    seen_obj: set[str] = set()
    for i, obj in enumerate(doc.objectives):
        if obj.id in seen_obj:
            out.append(Violation(f"objectives/{obj.id}", "duplicate_id"))
        seen_obj.add(obj.id)

    obs_count = len(doc.observations)
    seen_hyp: set[str] = set()
    for hyp in doc.hypotheses:
        base = f"hypotheses/{hyp.id}"
        if hyp.id in seen_hyp:
            out.append(Violation(base, "duplicate_id"))
        seen_hyp.add(hyp.id)
        if not 0.0 <= hyp.confidence <= 1.0:
            out.append(Violation(f"{base}/confidence", "confidence_range", str(hyp.confidence)))
        for j, ref in enumerate(hyp.evidence_refs):
            if not 0 <= ref < obs_count:
                out.append(Violation(f"{base}/evidence_refs/{j}", "evidence_ref_range", str(ref)))

    task_ids = {t.id for t in doc.task_plan}
    seen_task: set[str] = set()
    for task in doc.task_plan:
        base = f"task_plan/{task.id}"
        if task.id in seen_task:
            out.append(Violation(base, "duplicate_id"))
        seen_task.add(task.id)
        if not 0.0 <= task.confidence <= 1.0:
            out.append(Violation(f"{base}/confidence", "confidence_range", str(task.confidence)))
        for key in REQUIRED_PAYLOAD_KEYS[task.kind]:
            if key not in task.payload:
                out.append(Violation(f"{base}/payload/{key}", "payload_required_key", task.kind.value))
        for j, dep in enumerate(task.depends_on):
            if dep == task.id:
                out.append(Violation(f"{base}/depends_on/{j}", "self_dependency"))
            elif dep not in task_ids:
                out.append(Violation(f"{base}/depends_on/{j}", "dependency_exists", dep))
        if task.fallback_task is not None:
            if task.fallback_task == task.id:
                out.append(Violation(f"{base}/fallback_task", "self_fallback"))
            elif task.fallback_task not in task_ids:
                out.append(Violation(f"{base}/fallback_task", "fallback_exists", task.fallback_task))
        if task.kind is TaskKind.HANDOFF and not str(task.payload.get("to_provider", "")):
            out.append(Violation(f"{base}/payload/to_provider", "provider_nonempty"))

    previous = None
    for i, entry in enumerate(doc.reasoning_log):
        base = f"reasoning_log/{i}"
        if previous is not None and entry.timestamp < previous:
            out.append(Violation(f"{base}/timestamp", "reasoning_monotonic"))
        previous = entry.timestamp
        if not 0.0 <= entry.confidence <= 1.0:
            out.append(Violation(f"{base}/confidence", "confidence_range", str(entry.confidence)))
        if not HEX_DIGEST_PATTERN.match(entry.input_digest):
            out.append(Violation(f"{base}/input_digest", "digest_format"))
        if not entry.module_id or not entry.action or not entry.rationale:
            out.append(Violation(base, "entry_nonempty"))

    for i, record in enumerate(doc.verification):
        base = f"verification/{i}"
        if record.task_id not in task_ids:
            out.append(Violation(f"{base}/task_id", "verified_task_exists", record.task_id))
        if not record.actor:
            out.append(Violation(f"{base}/actor", "actor_nonempty"))

    return out
