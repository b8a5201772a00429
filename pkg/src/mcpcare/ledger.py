"""Append-only audit ledger with a SHA-256 hash chain.

Each event's hash covers the previous hash plus the canonical bytes of its
body (every field except prev_hash/this_hash), so any bit flipped in a stored
event, or any reordering, breaks verification at or before that sequence.

File layout (``<document_id>.ledger.jsonl``): a header line carrying the
format id, then one canonical event object per line.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable

from mcpcare.errors import LedgerClosed, MalformedDocument, SchemaViolation, StorageFailure
from mcpcare.errors import ChainBreak  # noqa: F401  (re-exported result type)
from mcpcare.jsoncanon import ZERO_DIGEST, canonical_bytes, digest, format_timestamp, parse_timestamp

LEDGER_FORMAT = "mcp-ledger/1"
LEDGER_SUFFIX = ".ledger.jsonl"

EVENT_KINDS = (
    "ingested",
    "proposed",
    "validated",
    "gated",
    "approved",
    "modified",
    "rejected",
    "dispatched",
    "executed",
    "failed",
    "fallback",
    "handoff_out",
    "handoff_in",
)

ACTOR_KINDS = ("engine", "module", "agent", "physician")


@dataclass(frozen=True)
class Actor:
    kind: str
    ident: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ACTOR_KINDS:
            raise ValueError(f"unknown actor kind {self.kind!r}")
        if self.kind != "engine" and not self.ident:
            raise ValueError(f"{self.kind} actor needs an identifier")

    def encode(self) -> str:
        return self.kind if self.kind == "engine" else f"{self.kind}:{self.ident}"

    @classmethod
    def parse(cls, text: str) -> Actor:
        kind, _, ident = text.partition(":")
        return cls(kind, ident)


ENGINE = Actor("engine")


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: datetime
    document_id: str
    document_version: int
    actor: Actor
    event_kind: str
    payload_digest: str
    detail: str
    prev_hash: str
    this_hash: str

    def body_tree(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "timestamp": format_timestamp(self.timestamp),
            "document_id": self.document_id,
            "document_version": self.document_version,
            "actor": self.actor.encode(),
            "event_kind": self.event_kind,
            "payload_digest": self.payload_digest,
            "detail": self.detail,
        }

    def body_bytes(self) -> bytes:
        # Frozen instances still carry __dict__; memoize the canonical body
        # so chain verification over large corpora stays hash-bound.
        cached = self.__dict__.get("_body")
        if cached is None:
            cached = canonical_bytes(self.body_tree())
            object.__setattr__(self, "_body", cached)
        return cached

    def to_tree(self) -> dict[str, Any]:
        tree = self.body_tree()
        tree["prev_hash"] = self.prev_hash
        tree["this_hash"] = self.this_hash
        return tree

    @classmethod
    def from_tree(cls, tree: Any) -> AuditEvent:
        if not isinstance(tree, dict):
            raise SchemaViolation("event", "type", "expected object")
        required = (
            "seq", "timestamp", "document_id", "document_version", "actor",
            "event_kind", "payload_digest", "detail", "prev_hash", "this_hash",
        )
        for key in required:
            if key not in tree:
                raise SchemaViolation(f"event/{key}", "missing_field")
        if not isinstance(tree["seq"], int) or not isinstance(tree["document_version"], int):
            raise SchemaViolation("event/seq", "type", "expected integer")
        for key in ("document_id", "actor", "event_kind", "payload_digest", "detail", "prev_hash", "this_hash"):
            if not isinstance(tree[key], str):
                raise SchemaViolation(f"event/{key}", "type", "expected string")
        try:
            actor = Actor.parse(tree["actor"])
        except ValueError as exc:
            raise SchemaViolation("event/actor", "actor_format", str(exc)) from None
        if tree["event_kind"] not in EVENT_KINDS:
            raise SchemaViolation("event/event_kind", "enum", tree["event_kind"])
        try:
            ts = parse_timestamp(tree["timestamp"])
        except ValueError as exc:
            raise SchemaViolation("event/timestamp", "timestamp", str(exc)) from None
        return cls(
            seq=tree["seq"],
            timestamp=ts,
            document_id=tree["document_id"],
            document_version=tree["document_version"],
            actor=actor,
            event_kind=tree["event_kind"],
            payload_digest=tree["payload_digest"],
            detail=tree["detail"],
            prev_hash=tree["prev_hash"],
            this_hash=tree["this_hash"],
        )


def compute_event_hash(prev_hash: str, event_body: bytes) -> str:
    return digest(prev_hash.encode("ascii") + event_body)


@dataclass(frozen=True)
class LedgerProof:
    head_hash: str
    length: int


def verify_chain(events: Iterable[AuditEvent]) -> LedgerProof | ChainBreak:
    """Walk the chain; return the proof, or the first broken sequence."""
    prev = ZERO_DIGEST
    count = 0
    for i, event in enumerate(events):
        if event.seq != i or event.prev_hash != prev:
            return ChainBreak(i)
        expected = compute_event_hash(prev, event.body_bytes())
        if event.this_hash != expected:
            return ChainBreak(i)
        prev = expected
        count += 1
    return LedgerProof(head_hash=prev, length=count)


class Ledger:
    """One document's event chain, optionally persisted line-by-line."""

    def __init__(self, document_id: str, path: Path | None = None):
        self.document_id = document_id
        self.path = path
        self._events: list[AuditEvent] = []
        self._closed = False

    # -- constructors ----------------------------------------------------

    @classmethod
    def from_events(cls, document_id: str, events: Iterable[AuditEvent]) -> Ledger:
        ledger = cls(document_id)
        for event in events:
            ledger._events.append(event)
        ledger._closed = bool(ledger._events) and ledger._events[-1].event_kind == "handoff_out"
        return ledger

    @classmethod
    def load(cls, path: Path) -> Ledger:
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        lines = [line for line in raw.splitlines() if line.strip()]
        if not lines:
            raise MalformedDocument(f"{path}: empty ledger file")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"{path}: bad header line: {exc}") from None
        if not isinstance(header, dict) or header.get("format") != LEDGER_FORMAT:
            raise MalformedDocument(f"{path}: not a {LEDGER_FORMAT} file")
        document_id = header.get("document_id", "")
        ledger = cls(document_id, path=path)
        for line in lines[1:]:
            try:
                tree = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}: bad event line: {exc}") from None
            ledger._events.append(AuditEvent.from_tree(tree))
        ledger._closed = bool(ledger._events) and ledger._events[-1].event_kind == "handoff_out"
        return ledger

    # -- accessors --------------------------------------------------------

    def events(self) -> tuple[AuditEvent, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    @property
    def closed(self) -> bool:
        return self._closed

    def head_hash(self) -> str:
        return self._events[-1].this_hash if self._events else ZERO_DIGEST

    # -- mutation ----------------------------------------------------------

    def append(
        self,
        *,
        timestamp: datetime,
        document_version: int,
        actor: Actor,
        event_kind: str,
        payload_digest: str = ZERO_DIGEST,
        detail: str = "",
    ) -> AuditEvent:
        if self._closed:
            raise LedgerClosed(f"{self.document_id}: sealed by handoff_out")
        if event_kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {event_kind!r}")
        prev = self.head_hash()
        event = AuditEvent(
            seq=len(self._events),
            timestamp=timestamp,
            document_id=self.document_id,
            document_version=document_version,
            actor=actor,
            event_kind=event_kind,
            payload_digest=payload_digest,
            detail=detail,
            prev_hash=prev,
            this_hash="",
        )
        this_hash = compute_event_hash(prev, event.body_bytes())
        event = dataclasses.replace(event, this_hash=this_hash)
        self._events.append(event)
        if event_kind == "handoff_out":
            self._closed = True
        if self.path is not None:
            self._write_line(event)
        return event

    def persisted_copy(self, path: Path) -> Ledger:
        """File-backed clone; writes every existing event to the new path."""
        clone = Ledger(self.document_id, path=path)
        for event in self._events:
            clone._events.append(event)
            clone._write_line(event)
        clone._closed = self._closed
        return clone

    def _write_line(self, event: AuditEvent) -> None:
        try:
            new_file = not self.path.exists()
            with self.path.open("a", encoding="utf-8") as fh:
                if new_file:
                    header = {"format": LEDGER_FORMAT, "document_id": self.document_id}
                    fh.write(canonical_bytes(header).decode("utf-8") + "\n")
                fh.write(canonical_bytes(event.to_tree()).decode("utf-8") + "\n")
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def verify(self) -> LedgerProof | ChainBreak:
        return verify_chain(self._events)
