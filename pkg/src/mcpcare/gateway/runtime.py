"""Wires the full stack: store, modules, policy, agents, engine, gateway state."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from mcpcare import fixtures
from mcpcare.agents import AgentRegistry, Clock
from mcpcare.agents.fhir import LabOrderAgent, MockFhirEndpoint, Transport
from mcpcare.agents.followup import FollowUpAgent, ScheduleBook
from mcpcare.agents.internal import InternalActionAgent
from mcpcare.document.lifecycle import document_hash
from mcpcare.document.model import McpDocument, TaskKind
from mcpcare.engine.core import TaskEngine
from mcpcare.engine.pipeline import Orchestrator
from mcpcare.engine.policy import GatePolicy, load_policy
from mcpcare.gateway.auth import AuthTable
from mcpcare.gateway.clock import SystemClock
from mcpcare.gateway.store import DocumentStore
from mcpcare.ledger import ENGINE, Ledger
from mcpcare.modules import ModuleRegistry
from mcpcare.replay import encode_task_map
from mcpcare.modules.guidelines import GuidelineRuleEngine, load_rules
from mcpcare.modules.templates import TemplateEngine, load_templates

DEFAULT_PORT = 8462


def ingest_document(store: DocumentStore, doc: McpDocument, clock: Clock) -> Ledger:
    """Register a document and open its ledger with the full-plan snapshot."""
    ledger = store.create(doc)
    states = {t.id: t.state.value for t in doc.task_plan}
    ledger.append(
        timestamp=clock.now(),
        document_version=doc.header.version,
        actor=ENGINE,
        event_kind="ingested",
        payload_digest=document_hash(doc),
        detail=f"tasks={encode_task_map(states)}",
    )
    return ledger


@dataclass
class Runtime:
    store: DocumentStore
    registry: ModuleRegistry
    policy: GatePolicy
    agents: AgentRegistry
    engine: TaskEngine
    orchestrator: Orchestrator
    clock: Clock
    auth: AuthTable
    schedule_book: ScheduleBook
    fhir_endpoint: MockFhirEndpoint | None


def build_runtime(
    *,
    root: Path | None = None,
    fixtures_dir: Path | None = None,
    clock: Clock | None = None,
    fhir_transport: Transport | None = None,
) -> Runtime:
    clock = clock or SystemClock()

    registry = ModuleRegistry()
    registry.register(TemplateEngine(load_templates(fixtures.load_json(fixtures.TEMPLATES_FILE, fixtures_dir))))
    registry.register(GuidelineRuleEngine(load_rules(fixtures.load_json(fixtures.RULES_FILE, fixtures_dir))))

    policy = load_policy(fixtures.read_text(fixtures.POLICY_FILE, fixtures_dir))
    auth = AuthTable.from_tree(fixtures.load_json(fixtures.USERS_FILE, fixtures_dir))

    fhir_endpoint: MockFhirEndpoint | None = None
    if fhir_transport is None:
        fhir_endpoint = MockFhirEndpoint()
        fhir_transport = fhir_endpoint

    schedule_book = ScheduleBook()
    agents = AgentRegistry()
    agents.register(TaskKind.LAB_ORDER, LabOrderAgent(fhir_transport))
    agents.register(TaskKind.FOLLOW_UP, FollowUpAgent(schedule_book))
    internal = InternalActionAgent()
    for kind in (TaskKind.REFERRAL, TaskKind.EVALUATION, TaskKind.MEDICATION_CHANGE, TaskKind.HANDOFF):
        agents.register(kind, internal)

    engine = TaskEngine(policy=policy, agents=agents, clock=clock)
    return Runtime(
        store=DocumentStore(root=root),
        registry=registry,
        policy=policy,
        agents=agents,
        engine=engine,
        orchestrator=Orchestrator(registry, engine),
        clock=clock,
        auth=auth,
        schedule_book=schedule_book,
        fhir_endpoint=fhir_endpoint,
    )
