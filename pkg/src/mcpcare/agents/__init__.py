"""Task agents: executors keyed by task kind, with injected clocks."""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Protocol

from mcpcare.document.model import McpDocument, TaskKind, TaskSpec


class Clock(Protocol):
    def now(self) -> datetime: ...


@dataclass(frozen=True)
class AgentResult:
    task_id: str
    status: str  # "completed" | "failed"
    info: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.status not in ("completed", "failed"):
            raise ValueError(f"bad agent status {self.status!r}")


@dataclass(frozen=True)
class AgentContext:
    document: McpDocument
    clock: Clock


class Agent(Protocol):
    agent_id: str

    def execute(self, task: TaskSpec, ctx: AgentContext) -> AgentResult: ...


class AgentRegistry:
    def __init__(self) -> None:
        self._by_kind: dict[TaskKind, Agent] = {}

    def register(self, kind: TaskKind, agent: Agent) -> None:
        self._by_kind[kind] = agent

    def for_kind(self, kind: TaskKind) -> Agent | None:
        return self._by_kind.get(kind)

    def kinds(self) -> list[TaskKind]:
        return sorted(self._by_kind, key=lambda k: k.value)
