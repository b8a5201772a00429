"""Deterministic reconstruction of engine state from ledger events alone."""
from __future__ import annotations

from typing import Sequence

from mcpcare.errors import NonReplayableEvent
from mcpcare.ledger import AuditEvent
from mcpcare.snapshot import EngineStateSnapshot

# Events that change a task's state carry `task=` and `to=` detail pairs.
TRANSITION_KINDS = frozenset(
    {"proposed", "gated", "approved", "modified", "rejected", "dispatched", "executed", "failed", "fallback"}
)
# Events that carry the full plan as `tasks=id:state,...`.
PLAN_BEARING_KINDS = frozenset({"ingested", "handoff_in"})
NEUTRAL_KINDS = frozenset({"validated", "handoff_out"})


def parse_detail(detail: str) -> dict[str, str]:
    """Decode the space-separated key=value detail grammar."""
    fields: dict[str, str] = {}
    for token in detail.split():
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise NonReplayableEvent(f"bad detail token {token!r}")
        fields[key] = value
    return fields


def parse_task_map(encoded: str) -> dict[str, str]:
    states: dict[str, str] = {}
    if not encoded:
        return states
    for pair in encoded.split(","):
        task_id, sep, state = pair.partition(":")
        if not sep or not task_id or not state:
            raise NonReplayableEvent(f"bad task map entry {pair!r}")
        states[task_id] = state
    return states


def encode_task_map(states: dict[str, str]) -> str:
    return ",".join(f"{t}:{s}" for t, s in sorted(states.items()))


def replay(events: Sequence[AuditEvent]) -> EngineStateSnapshot:
    """Fold events into the final snapshot; chain validity is the caller's job."""
    if not events:
        raise NonReplayableEvent("empty event sequence")
    first = events[0]
    if first.event_kind not in PLAN_BEARING_KINDS:
        raise NonReplayableEvent(f"ledger starts with {first.event_kind!r}")
    states: dict[str, str] = {}
    for event in events:
        fields = parse_detail(event.detail)
        if event.event_kind in PLAN_BEARING_KINDS:
            if "tasks" not in fields:
                raise NonReplayableEvent(f"seq {event.seq}: {event.event_kind} without tasks map")
            states = parse_task_map(fields["tasks"])
        elif event.event_kind in TRANSITION_KINDS:
            task_id = fields.get("task")
            to_state = fields.get("to")
            if not task_id or not to_state:
                raise NonReplayableEvent(f"seq {event.seq}: {event.event_kind} without task/to")
            states[task_id] = to_state
        elif event.event_kind in NEUTRAL_KINDS:
            continue
        else:
            raise NonReplayableEvent(f"seq {event.seq}: unknown kind {event.event_kind!r}")
    last = events[-1]
    return EngineStateSnapshot.build(
        document_id=first.document_id,
        document_version=last.document_version,
        task_states=states,
        timeline_length=len(events),
    )
