"""Replays scripted care episodes and compares them against frozen traces.

A scenario file carries a starting document, a step script (ingest, advance,
decide, handoff, accept) and the expected ledger trace as
``[event_kind, actor, task-or-target]`` triples. The runner executes the
script on a fresh in-memory runtime pair (sender and receiver share one
frozen clock) and reports the first divergence, if any.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from mcpcare.agents.followup import ScheduleEntry
from mcpcare.agents.handoff import HandoffPackage, accept_handoff, prepare_handoff
from mcpcare.document.model import McpDocument
from mcpcare.errors import FixtureInvalid
from mcpcare.gateway.clock import FixedClock
from mcpcare.gateway.runtime import Runtime, build_runtime, ingest_document
from mcpcare.jsoncanon import parse_timestamp
from mcpcare.ledger import AuditEvent
from mcpcare.replay import parse_detail, replay
from mcpcare.snapshot import EngineStateSnapshot

SCENARIO_FORMAT = "mcp-scenario/1"


def trace_triple(event: AuditEvent) -> list[str]:
    """Project an event onto the comparison trace: kind, actor, subject id."""
    fields = parse_detail(event.detail)
    subject = fields.get("task") or fields.get("target") or ""
    return [event.event_kind, event.actor.encode(), subject]


@dataclass
class TraceReport:
    scenario_id: str
    passed: bool
    trace: list[list[str]]
    expected_trace: list[list[str]]
    first_divergence: int | None
    final_snapshot: EngineStateSnapshot
    receiver_snapshot: EngineStateSnapshot | None
    continuity_ok: bool | None
    schedule: tuple[ScheduleEntry, ...]
    fhir_orders: list[dict[str, Any]]

    def summary(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "passed": self.passed,
            "events": len(self.trace),
            "expected_events": len(self.expected_trace),
            "first_divergence": self.first_divergence,
            "continuity_ok": self.continuity_ok,
            "final_snapshot": self.final_snapshot.to_tree(),
            "trace": self.trace,
        }


def _first_divergence(trace: list[list[str]], expected: list[list[str]]) -> int | None:
    for i, (got, want) in enumerate(zip(trace, expected)):
        if got != want:
            return i
    if len(trace) != len(expected):
        return min(len(trace), len(expected))
    return None


class ScenarioRunner:
    def __init__(self, scenario: dict[str, Any], fixtures_dir: Path | None = None):
        if not isinstance(scenario, dict) or scenario.get("format") != SCENARIO_FORMAT:
            raise FixtureInvalid(f"not a {SCENARIO_FORMAT} scenario")
        for key in ("scenario_id", "clock_start", "document", "steps", "expected_trace"):
            if key not in scenario:
                raise FixtureInvalid(f"scenario missing {key!r}")
        self.scenario = scenario
        self.fixtures_dir = fixtures_dir

    def run(self) -> TraceReport:
        clock = FixedClock(parse_timestamp(self.scenario["clock_start"]))
        sender = build_runtime(clock=clock, fixtures_dir=self.fixtures_dir)
        receiver = build_runtime(clock=clock, fixtures_dir=self.fixtures_dir)
        doc = McpDocument.from_tree(self.scenario["document"])
        doc_id = doc.header.id
        package: HandoffPackage | None = None

        for step in self.scenario["steps"]:
            op = step["op"]
            if op == "ingest":
                ingest_document(sender.store, doc, clock)
            elif op == "advance":
                sender.store.mutate(
                    doc_id, None,
                    lambda head, ledger: sender.orchestrator.reason_and_run(head, ledger)[0],
                )
            elif op == "decide":
                sender.store.mutate(
                    doc_id, None,
                    lambda head, ledger: sender.engine.apply_decision(
                        head, ledger,
                        task_id=step["task_id"],
                        decision=step["decision"],
                        actor_id=step["actor"],
                        note=step.get("note", ""),
                        modification=step.get("modification"),
                    ),
                )
            elif op == "handoff":
                def seal(head: McpDocument, ledger: Any) -> McpDocument:
                    nonlocal package
                    package = prepare_handoff(
                        head, ledger,
                        from_provider=step["from_provider"],
                        to_provider=step["to_provider"],
                        clock=clock,
                        allow_pending=bool(step.get("allow_pending", False)),
                    )
                    return head

                sender.store.mutate(doc_id, None, seal)
            elif op == "accept":
                if package is None:
                    raise FixtureInvalid("accept step before any handoff step")
                accepted, ledger = accept_handoff(
                    package, existing_ids=receiver.store.ids(), clock=clock
                )
                receiver.store.install(accepted, ledger)
            else:
                raise FixtureInvalid(f"unknown scenario op {op!r}")

        return self._report(sender, receiver, doc_id)

    def _report(self, sender: Runtime, receiver: Runtime, doc_id: str) -> TraceReport:
        sender_events = sender.store.ledger(doc_id).events()
        trace = [trace_triple(e) for e in sender_events]
        receiver_snapshot = None
        continuity_ok = None
        if receiver.store.exists(doc_id):
            receiver_events = receiver.store.ledger(doc_id).events()
            trace.extend(trace_triple(e) for e in receiver_events)
            receiver_snapshot = replay(receiver_events)
            continuity_ok = (
                receiver_snapshot.continuity_view() == replay(sender_events).continuity_view()
            )

        expected = [list(t) for t in self.scenario["expected_trace"]]
        divergence = _first_divergence(trace, expected)
        head = sender.store.head(doc_id)
        return TraceReport(
            scenario_id=self.scenario["scenario_id"],
            passed=divergence is None and continuity_ok is not False,
            trace=trace,
            expected_trace=expected,
            first_divergence=divergence,
            final_snapshot=sender.engine.snapshot(head, sender.store.ledger(doc_id)),
            receiver_snapshot=receiver_snapshot,
            continuity_ok=continuity_ok,
            schedule=sender.schedule_book.entries,
            fhir_orders=sender.fhir_endpoint.orders() if sender.fhir_endpoint else [],
        )
