"""In-system executor for referrals, evaluations, and medication changes.

These kinds act on records the organization already owns, so execution is the
act of recording them; the audit event is the effect.
"""
from __future__ import annotations

from mcpcare.agents import AgentContext, AgentResult
from mcpcare.document.model import TaskKind, TaskSpec

_SUMMARY_KEY = {
    TaskKind.REFERRAL: "specialty",
    TaskKind.EVALUATION: "instrument",
    TaskKind.MEDICATION_CHANGE: "drug",
    TaskKind.HANDOFF: "to_provider",
}


class InternalActionAgent:
    agent_id = "internal-action"

    def execute(self, task: TaskSpec, ctx: AgentContext) -> AgentResult:
        key = _SUMMARY_KEY.get(task.kind)
        info = {"recorded": "true"}
        if key is not None:
            value = str(task.payload.get(key, ""))
            if value:
                info[key] = value
        return AgentResult(task.id, "completed", info)
