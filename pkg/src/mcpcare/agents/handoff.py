"""Care handoff packaging: seal the chain, ship proof, verify on arrival.

A handoff closes the sender's ledger with a final handoff_out event whose
payload digest pins the exact document snapshot being transferred. The
receiver re-verifies everything locally before opening a fresh chain with a
handoff_in event, so continuity never rests on trust in the wire.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Iterable

from mcpcare.agents import Clock
from mcpcare.document.lifecycle import document_hash
from mcpcare.document.model import McpDocument, TaskKind, TaskState, TERMINAL_STATES
from mcpcare.errors import (
    ChainBreak,
    DuplicateDocument,
    InvalidPayload,
    PendingVerificationBlock,
    ProofMismatch,
    SchemaViolation,
)
from mcpcare.jsoncanon import digest, format_timestamp, parse_timestamp
from mcpcare.ledger import Actor, AuditEvent, Ledger, LedgerProof, verify_chain
from mcpcare.replay import encode_task_map

HANDOFF_FORMAT = "mcp-handoff/1"
HANDOFF_SUFFIX = ".handoff.json"
PROVIDER_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")
HANDOFF_ACTOR = Actor("agent", "handoff")
RATIONALE_WINDOW = 5


@dataclass(frozen=True)
class HandoffSummary:
    rationale_digest: str
    alerts: tuple[str, ...]
    pending_tasks: tuple[str, ...]

    def to_tree(self) -> dict[str, Any]:
        return {
            "rationale_digest": self.rationale_digest,
            "alerts": list(self.alerts),
            "pending_tasks": list(self.pending_tasks),
        }


@dataclass(frozen=True)
class HandoffPackage:
    document: McpDocument
    events: tuple[AuditEvent, ...]
    proof: LedgerProof
    summary: HandoffSummary
    from_provider: str
    to_provider: str
    issued_at: datetime

    def to_tree(self) -> dict[str, Any]:
        return {
            "format": HANDOFF_FORMAT,
            "issued_at": format_timestamp(self.issued_at),
            "from_provider": self.from_provider,
            "to_provider": self.to_provider,
            "document": self.document.to_tree(),
            "events": [e.to_tree() for e in self.events],
            "proof": {"head_hash": self.proof.head_hash, "length": self.proof.length},
            "summary": self.summary.to_tree(),
        }

    @classmethod
    def from_tree(cls, tree: Any) -> HandoffPackage:
        if not isinstance(tree, dict) or tree.get("format") != HANDOFF_FORMAT:
            raise SchemaViolation("format", "handoff_format", str(type(tree)))
        for key in ("issued_at", "from_provider", "to_provider", "document", "events", "proof", "summary"):
            if key not in tree:
                raise SchemaViolation(key, "missing_field")
        proof_tree = tree["proof"]
        summary_tree = tree["summary"]
        if not isinstance(proof_tree, dict) or not isinstance(summary_tree, dict):
            raise SchemaViolation("proof", "type", "expected objects")
        try:
            issued_at = parse_timestamp(tree["issued_at"])
        except ValueError as exc:
            raise SchemaViolation("issued_at", "timestamp", str(exc)) from None
        events = tuple(AuditEvent.from_tree(e) for e in tree["events"])
        return cls(
            document=McpDocument.from_tree(tree["document"]),
            events=events,
            proof=LedgerProof(
                head_hash=str(proof_tree.get("head_hash", "")),
                length=int(proof_tree.get("length", -1)),
            ),
            summary=HandoffSummary(
                rationale_digest=str(summary_tree.get("rationale_digest", "")),
                alerts=tuple(str(a) for a in summary_tree.get("alerts", [])),
                pending_tasks=tuple(str(t) for t in summary_tree.get("pending_tasks", [])),
            ),
            from_provider=str(tree["from_provider"]),
            to_provider=str(tree["to_provider"]),
            issued_at=issued_at,
        )

    def file_name(self) -> str:
        return f"{self.document.header.id}{HANDOFF_SUFFIX}"


def pending_task_ids(doc: McpDocument) -> tuple[str, ...]:
    """Every task the receiver inherits unfinished, sorted by id."""
    return tuple(sorted(t.id for t in doc.task_plan if t.state not in TERMINAL_STATES))


def missed_lab_alerts(doc: McpDocument) -> tuple[str, ...]:
    return tuple(
        sorted(
            f"missed_lab:{t.id}"
            for t in doc.task_plan
            if t.kind is TaskKind.LAB_ORDER
            and t.state in (TaskState.FAILED, TaskState.FALLBACK_ACTIVATED)
        )
    )


def rationale_text(doc: McpDocument, window: int = RATIONALE_WINDOW) -> str:
    lines = [
        f"[{entry.module_id}] {entry.action}: {entry.rationale}"
        for entry in doc.reasoning_log[-window:]
    ]
    return "\n".join(lines)


def build_summary(doc: McpDocument) -> HandoffSummary:
    return HandoffSummary(
        rationale_digest=digest(rationale_text(doc).encode("utf-8")),
        alerts=missed_lab_alerts(doc),
        pending_tasks=pending_task_ids(doc),
    )


def prepare_handoff(
    doc: McpDocument,
    ledger: Ledger,
    *,
    from_provider: str,
    to_provider: str,
    clock: Clock,
    allow_pending: bool = False,
) -> HandoffPackage:
    """Seal the ledger and assemble the transfer package.

    Refuses while any task sits pending_verification unless the sender
    explicitly acknowledges leaving open questions behind.
    """
    for provider in (from_provider, to_provider):
        if not PROVIDER_PATTERN.match(provider or ""):
            raise InvalidPayload(f"bad provider id {provider!r}")
    chain = verify_chain(ledger.events())
    if isinstance(chain, ChainBreak):
        raise chain
    awaiting = sorted(
        t.id for t in doc.task_plan if t.state is TaskState.PENDING_VERIFICATION
    )
    if awaiting and not allow_pending:
        raise PendingVerificationBlock(", ".join(awaiting))
    states = {t.id: t.state.value for t in doc.task_plan}
    ledger.append(
        timestamp=clock.now(),
        document_version=doc.header.version,
        actor=HANDOFF_ACTOR,
        event_kind="handoff_out",
        payload_digest=document_hash(doc),
        detail=f"to={to_provider} from={from_provider} tasks={encode_task_map(states)}",
    )
    events = ledger.events()
    proof = verify_chain(events)
    if isinstance(proof, ChainBreak):  # appended onto a verified chain
        raise proof
    return HandoffPackage(
        document=doc,
        events=events,
        proof=proof,
        summary=build_summary(doc),
        from_provider=from_provider,
        to_provider=to_provider,
        issued_at=clock.now(),
    )


def accept_handoff(
    package: HandoffPackage,
    *,
    existing_ids: Iterable[str],
    clock: Clock,
) -> tuple[McpDocument, Ledger]:
    """Re-verify a package locally and open the receiving chain."""
    doc = package.document
    doc_id = doc.header.id
    if doc_id in set(existing_ids):
        raise DuplicateDocument(doc_id)

    chain = verify_chain(package.events)
    if isinstance(chain, ChainBreak):
        raise ProofMismatch(f"chain break at seq {chain.seq}")
    if chain != package.proof:
        raise ProofMismatch("shipped proof does not match the event chain")
    if not package.events or package.events[-1].event_kind != "handoff_out":
        raise ProofMismatch("package chain does not end in handoff_out")
    closing = package.events[-1]
    if closing.payload_digest != document_hash(doc):
        raise ProofMismatch("document snapshot does not match the sealed digest")
    if closing.document_id != doc_id:
        raise ProofMismatch("ledger belongs to a different document")
    expected_summary = build_summary(doc)
    if expected_summary != package.summary:
        raise ProofMismatch("summary does not match the document")

    states = {t.id: t.state.value for t in doc.task_plan}
    ledger = Ledger(doc_id)
    ledger.append(
        timestamp=clock.now(),
        document_version=doc.header.version,
        actor=HANDOFF_ACTOR,
        event_kind="handoff_in",
        payload_digest=document_hash(doc),
        detail=(
            f"from={package.from_provider} origin_head={package.proof.head_hash} "
            f"tasks={encode_task_map(states)}"
        ),
    )
    return doc, ledger
