"""Follow-up scheduling agent: turns follow_up tasks into dated entries."""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

from mcpcare.agents import AgentContext, AgentResult
from mcpcare.document.model import TaskSpec
from mcpcare.errors import InvalidPayload
from mcpcare.jsoncanon import format_timestamp


@dataclass(frozen=True)
class ScheduleEntry:
    document_id: str
    task_id: str
    procedure: str
    due_at: datetime


@dataclass
class ScheduleBook:
    entries: list[ScheduleEntry] = field(default_factory=list)

    def add(self, entry: ScheduleEntry) -> None:
        self.entries.append(entry)

    def for_document(self, document_id: str) -> list[ScheduleEntry]:
        return [e for e in self.entries if e.document_id == document_id]


class FollowUpAgent:
    agent_id = "follow-up"

    def __init__(self, book: ScheduleBook):
        self.book = book

    def execute(self, task: TaskSpec, ctx: AgentContext) -> AgentResult:
        raw = task.payload.get("due_in_days")
        if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
            raise InvalidPayload(f"{task.id}: due_in_days missing")
        try:
            due_in_days = float(raw)
        except ValueError:
            raise InvalidPayload(f"{task.id}: due_in_days is not a number") from None
        if due_in_days <= 0:
            raise InvalidPayload(f"{task.id}: due_in_days must be positive")
        procedure = task.payload.get("procedure")
        if not isinstance(procedure, str) or not procedure:
            raise InvalidPayload(f"{task.id}: procedure must be a non-empty string")
        due_at = ctx.clock.now() + timedelta(days=due_in_days)
        self.book.add(ScheduleEntry(
            document_id=ctx.document.header.id,
            task_id=task.id,
            procedure=procedure,
            due_at=due_at,
        ))
        return AgentResult(task.id, "completed", {"due_at": format_timestamp(due_at)})
