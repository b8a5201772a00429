"""The task engine: staged advance rounds, physician decisions, simulation.

One advance round performs every currently-legal transition once, in four
stages over the dependency order: wake draft hooks whose dependencies
completed, gate ready proposed tasks (auto-approving where policy allows),
dispatch approved tasks to agents, then activate fallbacks for failed or
rejected tasks. Each productive round mints exactly one document version and
appends one ledger event per task transition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from mcpcare.agents import AgentContext, AgentRegistry, Clock
from mcpcare.document.lifecycle import document_hash, next_version_tree, seal_tree
from mcpcare.document.model import (
    DecisionKind,
    McpDocument,
    REQUIRED_PAYLOAD_KEYS,
    TaskSpec,
    TaskState,
    _task_from_tree,
)
from mcpcare.engine.graph import plan
from mcpcare.engine.policy import GatePolicy
from mcpcare.errors import InvalidModification, McpError, TaskNotPending
from mcpcare.jsoncanon import digest_tree, format_timestamp
from mcpcare.ledger import Actor, AuditEvent, ENGINE, Ledger
from mcpcare.snapshot import EngineStateSnapshot

_DECISION_EVENT_KIND = {
    DecisionKind.APPROVE: "approved",
    DecisionKind.MODIFY: "modified",
    DecisionKind.REJECT: "rejected",
}
_DECISION_TARGET_STATE = {
    DecisionKind.APPROVE: TaskState.APPROVED,
    DecisionKind.MODIFY: TaskState.APPROVED,
    DecisionKind.REJECT: TaskState.REJECTED,
}


@dataclass(frozen=True)
class PendingEvent:
    actor: Actor
    event_kind: str
    payload_digest: str
    detail: str


@dataclass
class AdvanceResult:
    document: McpDocument
    events: list[AuditEvent] = field(default_factory=list)
    transitions: list[tuple[str, str, str]] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)

    @property
    def quiescent(self) -> bool:
        return not self.events


class TaskEngine:
    def __init__(self, policy: GatePolicy, agents: AgentRegistry, clock: Clock):
        self.policy = policy
        self.agents = agents
        self.clock = clock

    # -- state reads -------------------------------------------------------

    def snapshot(self, doc: McpDocument, ledger: Ledger) -> EngineStateSnapshot:
        return EngineStateSnapshot.build(
            document_id=doc.header.id,
            document_version=doc.header.version,
            task_states={t.id: t.state.value for t in doc.task_plan},
            timeline_length=len(ledger),
        )

    # -- advance -----------------------------------------------------------

    def advance(self, doc: McpDocument, ledger: Ledger) -> AdvanceResult:
        """Run one round; with no legal transitions this is a no-op."""
        order = plan(doc).order
        tree = next_version_tree(doc)
        entries = {e["id"]: e for e in tree["task_plan"]}
        fallback_targets = {e["fallback_task"] for e in tree["task_plan"] if e["fallback_task"]}
        ctx = AgentContext(document=doc, clock=self.clock)

        pending: list[PendingEvent] = []
        transitions: list[tuple[str, str, str]] = []
        notices: list[str] = []

        def move(entry: dict[str, Any], to: TaskState, event: PendingEvent) -> None:
            transitions.append((entry["id"], entry["state"], to.value))
            entry["state"] = to.value
            pending.append(event)

        def deps_completed(entry: dict[str, Any]) -> bool:
            return all(
                entries[d]["state"] == TaskState.COMPLETED.value for d in entry["depends_on"]
            )

        # Stage 0: wake draft hooks. Fallback drafts wake only via activation.
        for tid in order:
            entry = entries[tid]
            if (
                entry["state"] == TaskState.DRAFT.value
                and tid not in fallback_targets
                and deps_completed(entry)
            ):
                move(entry, TaskState.PROPOSED, PendingEvent(
                    actor=ENGINE,
                    event_kind="proposed",
                    payload_digest=digest_tree(entry["payload"]),
                    detail=f"task={tid} from=draft to=proposed trigger=deps",
                ))

        # Stage 1: gate ready proposed tasks; auto-advance where policy allows.
        for tid in order:
            entry = entries[tid]
            if entry["state"] != TaskState.PROPOSED.value or not deps_completed(entry):
                continue
            move(entry, TaskState.PENDING_VERIFICATION, PendingEvent(
                actor=ENGINE,
                event_kind="gated",
                payload_digest=digest_tree(entry["payload"]),
                detail=f"task={tid} from=proposed to=pending_verification",
            ))
            view = _task_from_tree(entry, f"task_plan/{tid}")
            if self.policy.auto_advances(view):
                move(entry, TaskState.APPROVED, PendingEvent(
                    actor=ENGINE,
                    event_kind="gated",
                    payload_digest=digest_tree(entry["payload"]),
                    detail=f"task={tid} from=pending_verification to=approved auto=true",
                ))

        # Stage 2: dispatch approved tasks to their agents.
        for tid in order:
            entry = entries[tid]
            if entry["state"] != TaskState.APPROVED.value or not deps_completed(entry):
                continue
            view = _task_from_tree(entry, f"task_plan/{tid}")
            agent = self.agents.for_kind(view.kind)
            if agent is None:
                notices.append(f"{tid}: no agent for kind {view.kind.value}")
                continue
            move(entry, TaskState.EXECUTING, PendingEvent(
                actor=ENGINE,
                event_kind="dispatched",
                payload_digest=digest_tree(entry["payload"]),
                detail=f"task={tid} from=approved to=executing agent={agent.agent_id}",
            ))
            try:
                result = agent.execute(view, ctx)
                status, info = result.status, dict(result.info)
            except McpError as exc:
                status, info = "failed", {"reason": type(exc).__name__}
            extra = _encode_info(info)
            if status == "completed":
                move(entry, TaskState.COMPLETED, PendingEvent(
                    actor=Actor("agent", agent.agent_id),
                    event_kind="executed",
                    payload_digest=digest_tree(info),
                    detail=f"task={tid} from=executing to=completed{extra}",
                ))
            else:
                move(entry, TaskState.FAILED, PendingEvent(
                    actor=Actor("agent", agent.agent_id),
                    event_kind="failed",
                    payload_digest=digest_tree(info),
                    detail=f"task={tid} from=executing to=failed{extra}",
                ))

        # Stage 3: activate fallbacks for failed or rejected tasks.
        for entry in tree["task_plan"]:
            state = entry["state"]
            if state not in (TaskState.FAILED.value, TaskState.REJECTED.value):
                continue
            fid = entry["fallback_task"]
            if fid is None or entries[fid]["state"] != TaskState.DRAFT.value:
                continue
            tid = entry["id"]
            move(entry, TaskState.FALLBACK_ACTIVATED, PendingEvent(
                actor=ENGINE,
                event_kind="fallback",
                payload_digest=digest_tree(entry["payload"]),
                detail=f"task={tid} from={state} to=fallback_activated fallback={fid}",
            ))
            move(entries[fid], TaskState.PROPOSED, PendingEvent(
                actor=ENGINE,
                event_kind="proposed",
                payload_digest=digest_tree(entries[fid]["payload"]),
                detail=f"task={fid} from=draft to=proposed trigger={tid}",
            ))

        if not pending:
            return AdvanceResult(document=doc, notices=notices)

        new_doc = seal_tree(tree)
        events = [
            ledger.append(
                timestamp=self.clock.now(),
                document_version=new_doc.header.version,
                actor=p.actor,
                event_kind=p.event_kind,
                payload_digest=p.payload_digest,
                detail=p.detail,
            )
            for p in pending
        ]
        return AdvanceResult(document=new_doc, events=events, transitions=transitions, notices=notices)

    def run_to_quiescence(self, doc: McpDocument, ledger: Ledger) -> tuple[McpDocument, EngineStateSnapshot]:
        """Advance until a round makes no transitions; bounded by plan size."""
        limit = 4 * (len(doc.task_plan) + 2)
        for _ in range(limit):
            result = self.advance(doc, ledger)
            doc = result.document
            if result.quiescent:
                return doc, self.snapshot(doc, ledger)
        raise RuntimeError(f"{doc.header.id}: no quiescence after {limit} rounds")

    # -- physician decisions -------------------------------------------------

    def apply_decision(
        self,
        doc: McpDocument,
        ledger: Ledger,
        *,
        task_id: str,
        decision: DecisionKind | str,
        actor_id: str,
        note: str = "",
        modification: dict[str, Any] | None = None,
    ) -> McpDocument:
        decision = DecisionKind(decision)
        task = doc.task(task_id)
        if task is None:
            raise TaskNotPending(f"{task_id}: no such task")
        if task.state is not TaskState.PENDING_VERIFICATION:
            raise TaskNotPending(f"{task_id}: state is {task.state.value}")
        if decision is DecisionKind.MODIFY:
            _check_modification(task, modification)
        elif modification is not None:
            raise InvalidModification(f"{decision.value} decision does not take a modification")

        target = _DECISION_TARGET_STATE[decision]
        tree = next_version_tree(doc)
        entry = next(e for e in tree["task_plan"] if e["id"] == task_id)
        entry["state"] = target.value
        if decision is DecisionKind.MODIFY:
            entry["payload"] = dict(modification or {})
        record_tree = {
            "timestamp": format_timestamp(self.clock.now()),
            "actor": actor_id,
            "task_id": task_id,
            "decision": decision.value,
            "note": note,
            "modification": dict(modification) if modification is not None else None,
        }
        tree["verification"].append(record_tree)
        new_doc = seal_tree(tree)
        ledger.append(
            timestamp=self.clock.now(),
            document_version=new_doc.header.version,
            actor=Actor("physician", actor_id),
            event_kind=_DECISION_EVENT_KIND[decision],
            payload_digest=digest_tree(record_tree),
            detail=f"task={task_id} from=pending_verification to={target.value}",
        )
        return new_doc

    # -- simulation ----------------------------------------------------------

    def simulate_decision(
        self,
        doc: McpDocument,
        ledger: Ledger,
        *,
        task_id: str,
        decision: DecisionKind | str,
        actor_id: str,
        note: str = "",
        modification: dict[str, Any] | None = None,
    ) -> tuple[EngineStateSnapshot, dict[str, list[str | None]]]:
        """Run a decision to quiescence on throwaway copies; nothing persists."""
        scratch = Ledger.from_events(ledger.document_id, ledger.events())
        before = {t.id: t.state.value for t in doc.task_plan}
        changed = self.apply_decision(
            doc, scratch,
            task_id=task_id, decision=decision, actor_id=actor_id,
            note=note, modification=modification,
        )
        final, snap = self.run_to_quiescence(changed, scratch)
        return snap, _delta(before, final)


def _delta(before: dict[str, str], final: McpDocument) -> dict[str, list[str | None]]:
    after = {t.id: t.state.value for t in final.task_plan}
    out: dict[str, list[str | None]] = {}
    for tid in sorted(set(before) | set(after)):
        b, a = before.get(tid), after.get(tid)
        if b != a:
            out[tid] = [b, a]
    return out


def _check_modification(task: TaskSpec, modification: dict[str, Any] | None) -> None:
    if not isinstance(modification, dict) or not modification:
        raise InvalidModification("modify decision needs a replacement payload")
    for key, value in modification.items():
        if not isinstance(key, str):
            raise InvalidModification(f"payload key {key!r} is not a string")
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise InvalidModification(f"payload value for {key!r} must be string or number")
    missing = [k for k in REQUIRED_PAYLOAD_KEYS[task.kind] if k not in modification]
    if missing:
        raise InvalidModification(f"{task.kind.value} payload missing {', '.join(missing)}")


def _encode_info(info: dict[str, str]) -> str:
    """Fold agent info into detail tokens; skip values the grammar can't carry."""
    parts = []
    for key in sorted(info):
        value = str(info[key])
        if not key.replace("_", "").isalnum():
            continue
        if any(ch.isspace() for ch in value) or "=" in value or not value:
            continue
        parts.append(f"{key}={value}")
    return (" " + " ".join(parts)) if parts else ""
