"""Reasoning pipeline: propose, validate, incorporate, then run to quiescence.

Generative modules are consulted in module-id order; every surviving proposal
is cross-checked by every descriptive module before its entities land in the
document. A proposal is skipped whole when any of its entity ids already
exist, which makes re-running the pipeline idempotent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from mcpcare.document.lifecycle import document_hash, next_version_tree, seal_tree
from mcpcare.document.model import Hypothesis, McpDocument, TaskSpec, TaskState
from mcpcare.engine.core import TaskEngine
from mcpcare.jsoncanon import digest_tree, format_timestamp
from mcpcare.ledger import Actor, AuditEvent, Ledger
from mcpcare.modules import ModuleRegistry
from mcpcare.modules.guidelines import Verdict
from mcpcare.modules.templates import Proposal
from mcpcare.snapshot import EngineStateSnapshot


@dataclass
class IncorporationResult:
    document: McpDocument
    events: list[AuditEvent]
    proposals: list[Proposal]


class Orchestrator:
    def __init__(self, registry: ModuleRegistry, engine: TaskEngine):
        self.registry = registry
        self.engine = engine

    def reason_and_run(
        self, doc: McpDocument, ledger: Ledger
    ) -> tuple[McpDocument, EngineStateSnapshot]:
        """One full pass: incorporate fresh proposals, then drain the engine."""
        incorporated = self.incorporate(doc, ledger)
        return self.engine.run_to_quiescence(incorporated.document, ledger)

    def incorporate(self, doc: McpDocument, ledger: Ledger) -> IncorporationResult:
        input_digest = document_hash(doc)
        existing = {t.id for t in doc.task_plan} | {h.id for h in doc.hypotheses}

        kept: list[tuple[Any, Proposal, list[tuple[Any, Verdict]]]] = []
        for generator in self.registry.generative():
            for proposal in generator.propose(doc):
                ids = proposal.entity_ids()
                if any(i in existing for i in ids):
                    continue
                existing.update(ids)
                targets = _targets(proposal)
                verdicts: list[tuple[Any, Verdict]] = []
                for checker in self.registry.descriptive():
                    for verdict in checker.validate_targets(doc, targets):
                        verdicts.append((checker, verdict))
                kept.append((generator, proposal, verdicts))

        if not kept:
            return IncorporationResult(document=doc, events=[], proposals=[])

        tree = next_version_tree(doc)
        now = format_timestamp(self.engine.clock.now())
        staged: list[tuple[Actor, str, str, str]] = []  # actor, kind, digest, detail

        for generator, proposal, verdicts in kept:
            blocked = {
                v.target_id for _, v in verdicts if v.target_kind == "task" and v.overall == "blocked"
            }
            if proposal.hypothesis is not None:
                tree["hypotheses"].append(proposal.hypothesis.to_tree())
            for task, born_state in [(t, TaskState.PROPOSED) for t in proposal.tasks] + [
                (t, TaskState.DRAFT) for t in proposal.followups
            ]:
                entry = task.to_tree()
                entry["state"] = born_state.value
                if task.id in blocked:
                    entry["requires_approval"] = True
                tree["task_plan"].append(entry)
                staged.append((
                    Actor("module", generator.descriptor.module_id),
                    "proposed",
                    digest_tree(entry["payload"]),
                    f"task={task.id} to={born_state.value} template={proposal.template_id}",
                ))
            entity_ids = ",".join(proposal.entity_ids())
            tree["reasoning_log"].append({
                "timestamp": now,
                "module_id": generator.descriptor.module_id,
                "action": f"propose template={proposal.template_id} tasks={entity_ids}",
                "rationale": proposal.rationale,
                "confidence": proposal.confidence,
                "input_digest": input_digest,
            })
            for checker, verdict in verdicts:
                tree["reasoning_log"].append({
                    "timestamp": now,
                    "module_id": checker.descriptor.module_id,
                    "action": f"validate target={verdict.target_id} overall={verdict.overall}",
                    "rationale": verdict.notes,
                    "confidence": 1.0,
                    "input_digest": input_digest,
                })
                staged.append((
                    Actor("module", checker.descriptor.module_id),
                    "validated",
                    digest_tree(verdict.to_tree()),
                    f"target={verdict.target_id} overall={verdict.overall}",
                ))

        new_doc = seal_tree(tree)
        events = [
            ledger.append(
                timestamp=self.engine.clock.now(),
                document_version=new_doc.header.version,
                actor=actor,
                event_kind=kind,
                payload_digest=payload_digest,
                detail=detail,
            )
            for actor, kind, payload_digest, detail in staged
        ]
        return IncorporationResult(
            document=new_doc, events=events, proposals=[p for _, p, _ in kept]
        )


def _targets(proposal: Proposal) -> list[TaskSpec | Hypothesis]:
    targets: list[TaskSpec | Hypothesis] = []
    if proposal.hypothesis is not None:
        targets.append(proposal.hypothesis)
    targets.extend(proposal.tasks)
    targets.extend(proposal.followups)
    return targets
