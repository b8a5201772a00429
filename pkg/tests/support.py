"""Shared test machinery: generators, oracles, exploration, and a live server.

The rule-verdict oracle here deliberately re-implements evaluation over raw
JSON trees (never the package's dataclasses) so the two codepaths share no
traversal logic. Document and ledger generators are seeded random.Random
instances; a given seed always yields the same artifacts.
"""
from __future__ import annotations

import itertools
import json
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Callable, Iterator

import uvicorn

from mcpcare.agents import AgentRegistry, AgentResult
from mcpcare.document.lifecycle import document_hash
from mcpcare.document.model import (
    LEGAL_TRANSITIONS,
    McpDocument,
    TaskKind,
    TaskState,
)
from mcpcare.engine.core import TaskEngine
from mcpcare.engine.policy import GatePolicy
from mcpcare.errors import McpError
from mcpcare.gateway.clock import FixedClock
from mcpcare.ledger import (
    Actor,
    AuditEvent,
    ENGINE,
    EVENT_KINDS,
    Ledger,
    LedgerProof,
    compute_event_hash,
    verify_chain,
)
from mcpcare.replay import encode_task_map, replay

UTC = timezone.utc
CLOCK_START = datetime(2025, 3, 2, 9, 0, 0, tzinfo=UTC)

# -- deterministic time ---------------------------------------------------------


def fixed_clock(moment: datetime = CLOCK_START) -> FixedClock:
    return FixedClock(moment)


# -- random document generation ---------------------------------------------------

_CODES = ("A1C", "EGFR", "BP_SYS", "GLUC_VAR", "FMR1", "ENGAGE_TOTAL", "ENGAGE_ADHERENT", "EEG_BASE")
_UNITS = ("%", "mL/min", "mmHg", "score", "", "count")
_SOURCES = ("ehr", "sensor", "self_report", "clinician")
_CATEGORIES = ("caregiver_interview", "care_coordination", "clinic_visit", "triage")
_WORDS = (
    "follow", "renal", "baseline", "review", "stable", "variable", "pending",
    "café", "β-blocker", "naïve", "elevated", "missed", "escalate",
)
_PRIORITIES = ("low", "medium", "high")
_OBJ_STATUS = ("open", "met", "abandoned")
_HYP_STATUS = ("provisional", "confirmed", "rejected")
_TASK_STATES = tuple(s.value for s in TaskState)
_DECISIONS = ("approve", "modify", "reject")

_PAYLOAD_TEMPLATES: dict[str, dict[str, Any]] = {
    "lab_order": {"test_code": "A1C", "reason": "interval check"},
    "referral": {"specialty": "nephrology", "reason": "renal review"},
    "follow_up": {"due_in_days": 14, "procedure": "telehealth check-in"},
    "medication_change": {"drug": "metformin", "change": "titrate", "reason": "control"},
    "evaluation": {"instrument": "phq-9"},
    "handoff": {"to_provider": "clinic-b"},
}


def _rng_timestamp(rng: random.Random) -> str:
    base = datetime(2020, 1, 1, tzinfo=UTC) + timedelta(
        days=rng.randrange(0, 3650), seconds=rng.randrange(0, 86400)
    )
    text = base.strftime("%Y-%m-%dT%H:%M:%S")
    if rng.random() < 0.25:
        frac = f"{rng.randrange(1, 1000000):06d}".rstrip("0") or "1"
        text += f".{frac}"
    return text + "Z"


def _rng_text(rng: random.Random, lo: int = 1, hi: int = 5) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(lo, hi)))


def _rng_scalar(rng: random.Random) -> Any:
    roll = rng.random()
    if roll < 0.4:
        return round(rng.uniform(-500, 500), rng.randint(0, 6))
    if roll < 0.7:
        return rng.randrange(-1000, 1000)
    return _rng_text(rng)


def _rng_hex(rng: random.Random) -> str:
    return "".join(rng.choice("0123456789abcdef") for _ in range(64))


def random_document_tree(rng: random.Random) -> dict[str, Any]:
    """A structurally and semantically valid document tree."""
    version = rng.choice((1, 1, 2, rng.randint(3, 40)))
    doc_id = f"MCP-{rng.choice(('FXS', 'CHRONIC', 'GEN', 'Z9'))}-{rng.randrange(1000)}"
    header = {
        "schema_version": "mcp/1",
        "id": doc_id,
        "version": version,
        "created_at": _rng_timestamp(rng),
        "parent_hash": "0" * 64 if version == 1 else _rng_hex(rng),
    }
    demographics = {"patient_id": f"P-{rng.randrange(10000)}"}
    if rng.random() < 0.8:
        demographics["age_years"] = str(rng.randrange(1, 95))
    if rng.random() < 0.3:
        demographics["preferred_language"] = rng.choice(("en", "es", "fr", "de"))

    observations = [
        {
            "code": rng.choice(_CODES),
            "value": _rng_scalar(rng),
            "unit": rng.choice(_UNITS),
            "source": rng.choice(_SOURCES),
            "timestamp": _rng_timestamp(rng),
        }
        for _ in range(rng.randrange(0, 8))
    ]
    history_notes = [
        {"timestamp": _rng_timestamp(rng), "category": rng.choice(_CATEGORIES), "text": _rng_text(rng)}
        for _ in range(rng.randrange(0, 4))
    ]
    objectives = [
        {
            "id": f"obj-{i}",
            "description": _rng_text(rng),
            "priority": rng.choice(_PRIORITIES),
            "status": rng.choice(_OBJ_STATUS),
        }
        for i in range(rng.randrange(0, 3))
    ]
    hypotheses = [
        {
            "id": f"h-{i}",
            "condition_code": rng.choice(("FXS", "T2DM", "CKD", "HTN")),
            "narrative": _rng_text(rng),
            "confidence": round(rng.random(), 4),
            "status": rng.choice(_HYP_STATUS),
            "evidence_refs": sorted(
                rng.sample(range(len(observations)), k=rng.randrange(0, min(3, len(observations)) + 1))
            ) if observations else [],
        }
        for i in range(rng.randrange(0, 3))
    ]

    task_ids = [f"t-{i}" for i in range(rng.randrange(0, 6))]
    task_plan = []
    for i, tid in enumerate(task_ids):
        kind = rng.choice(tuple(_PAYLOAD_TEMPLATES))
        payload = dict(_PAYLOAD_TEMPLATES[kind])
        if rng.random() < 0.4:
            payload["note"] = _rng_text(rng, 1, 3)
        deps = rng.sample(task_ids[:i], k=rng.randrange(0, min(2, i) + 1))
        fallback = None
        others = [t for t in task_ids if t != tid]
        if others and rng.random() < 0.25:
            fallback = rng.choice(others)
        task_plan.append(
            {
                "id": tid,
                "kind": kind,
                "payload": payload,
                "state": rng.choice(_TASK_STATES),
                "confidence": round(rng.random(), 4),
                "requires_approval": rng.random() < 0.5,
                "depends_on": deps,
                "fallback_task": fallback,
            }
        )

    log_times = sorted(
        (_rng_timestamp(rng) for _ in range(rng.randrange(0, 4))), key=_oracle_parse_ts
    )
    reasoning_log = [
        {
            "timestamp": ts,
            "module_id": rng.choice(("gen-template/1", "guideline-rules/1")),
            "action": f"propose template=tp-{rng.randrange(5)} tasks={','.join(task_ids[:2]) or 'none'}",
            "rationale": _rng_text(rng),
            "confidence": round(rng.random(), 4),
            "input_digest": _rng_hex(rng),
        }
        for ts in log_times
    ]
    verification = [
        {
            "timestamp": _rng_timestamp(rng),
            "actor": f"dr-{rng.choice(('chen', 'osei', 'ibarra'))}",
            "task_id": rng.choice(task_ids),
            "decision": rng.choice(_DECISIONS),
            "note": _rng_text(rng, 0, 3),
            "modification": {"reason": _rng_text(rng, 1, 2)} if rng.random() < 0.3 else None,
        }
        for _ in range(rng.randrange(0, 3) if task_ids else 0)
    ]

    return {
        "header": header,
        "demographics": demographics,
        "observations": observations,
        "history_notes": history_notes,
        "objectives": objectives,
        "hypotheses": hypotheses,
        "task_plan": task_plan,
        "reasoning_log": reasoning_log,
        "verification": verification,
    }


def random_mutations(rng: random.Random, tree: dict[str, Any]) -> dict[str, Any]:
    """A structurally valid variant of ``tree`` (deep-copied, never aliased)."""
    out = json.loads(json.dumps(tree))
    for _ in range(rng.randint(1, 6)):
        choice = rng.random()
        if choice < 0.15:
            out["header"]["version"] += rng.randint(1, 3)
            out["header"]["parent_hash"] = _rng_hex(rng)
        elif choice < 0.3:
            out["observations"].append(
                {
                    "code": rng.choice(_CODES),
                    "value": _rng_scalar(rng),
                    "unit": rng.choice(_UNITS),
                    "source": rng.choice(_SOURCES),
                    "timestamp": _rng_timestamp(rng),
                }
            )
        elif choice < 0.4 and out["observations"]:
            gone = rng.randrange(len(out["observations"]))
            out["observations"].pop(gone)
            for hyp in out["hypotheses"]:
                hyp["evidence_refs"] = [
                    r - (r > gone) for r in hyp["evidence_refs"] if r != gone
                ]
        elif choice < 0.5 and out["task_plan"]:
            task = rng.choice(out["task_plan"])
            task["confidence"] = round(rng.random(), 4)
            task["requires_approval"] = not task["requires_approval"]
        elif choice < 0.6 and out["task_plan"]:
            task = rng.choice(out["task_plan"])
            task["payload"]["note"] = _rng_text(rng, 1, 2)
        elif choice < 0.7 and len(out["task_plan"]) > 1:
            rng.shuffle(out["task_plan"])
        elif choice < 0.8 and out["hypotheses"]:
            hyp = rng.choice(out["hypotheses"])
            hyp["status"] = rng.choice(_HYP_STATUS)
            hyp["narrative"] = _rng_text(rng)
        elif choice < 0.9:
            out["demographics"][rng.choice(("patient_id", "age_years", "plan"))] = str(
                rng.randrange(1000)
            )
        else:
            out["history_notes"].append(
                {
                    "timestamp": _rng_timestamp(rng),
                    "category": rng.choice(_CATEGORIES),
                    "text": _rng_text(rng),
                }
            )
    return out


# -- independent rule-verdict oracle ----------------------------------------------

_ORACLE_MISSING = object()


def _oracle_latest(doc_tree: dict[str, Any], code: str) -> Any:
    best_ts: str | None = None
    best_value: Any = _ORACLE_MISSING
    for obs in doc_tree["observations"]:
        if obs["code"] != code:
            continue
        ts = _oracle_parse_ts(obs["timestamp"])
        if best_ts is None or ts >= best_ts:
            best_ts = ts
            best_value = obs["value"]
    return best_value


def _oracle_parse_ts(text: str) -> Any:
    out = text.replace("Z", "+00:00")
    if "." in out:
        head, _, rest = out.partition(".")
        frac, _, offset = rest.partition("+")
        out = f"{head}.{frac.ljust(6, '0')}+{offset}"
    return datetime.fromisoformat(out)


def _oracle_select(selector: str, doc_tree: dict[str, Any], target: dict[str, Any], kind: str) -> Any:
    if selector.startswith("target.payload."):
        if kind != "task":
            return _ORACLE_MISSING
        return target["payload"].get(selector[len("target.payload."):], _ORACLE_MISSING)
    if selector == "target.kind":
        return target["kind"] if kind == "task" else _ORACLE_MISSING
    if selector == "target.requires_approval":
        return target["requires_approval"] if kind == "task" else _ORACLE_MISSING
    if selector == "target.condition_code":
        return target["condition_code"] if kind == "hypothesis" else _ORACLE_MISSING
    if selector == "target.evidence_count":
        return len(target["evidence_refs"]) if kind == "hypothesis" else _ORACLE_MISSING
    if selector in ("target.id", "target.confidence"):
        return target[selector[len("target."):]]
    if selector.startswith("target."):
        return _ORACLE_MISSING
    if selector.startswith("observation."):
        return _oracle_latest(doc_tree, selector[len("observation."):])
    if selector.startswith("demographic."):
        return doc_tree["demographics"].get(selector[len("demographic."):], _ORACLE_MISSING)
    raise AssertionError(f"oracle cannot address {selector!r}")


def _oracle_number(value: Any) -> float | None:
    if isinstance(value, bool) or isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def _oracle_compare(op: str, left: Any, right: Any) -> bool:
    if op == "present":
        return left is not _ORACLE_MISSING
    if op == "absent":
        return left is _ORACLE_MISSING
    if left is _ORACLE_MISSING:
        return op == "ne"
    ln, rn = _oracle_number(left), _oracle_number(right)
    numeric = ln is not None and rn is not None
    if numeric:
        left, right = ln, rn
    if op == "eq":
        return left == right
    if op == "ne":
        return left != right
    if not numeric:
        return False
    return {"lt": left < right, "le": left <= right, "gt": left > right, "ge": left >= right}[op]


def _oracle_predicate(node: dict[str, Any], doc_tree: dict[str, Any], target: dict[str, Any], kind: str) -> bool:
    if "all" in node:
        for child in node["all"]:
            if not _oracle_predicate(child, doc_tree, target, kind):
                return False
        return True
    if "any" in node:
        for child in node["any"]:
            if _oracle_predicate(child, doc_tree, target, kind):
                return True
        return False
    if "not" in node:
        return not _oracle_predicate(node["not"], doc_tree, target, kind)
    left = _oracle_select(node["field"], doc_tree, target, kind)
    return _oracle_compare(node["op"], left, node.get("value"))


def oracle_verdict(
    doc_tree: dict[str, Any], target: dict[str, Any], kind: str, rules_tree: dict[str, Any]
) -> dict[str, Any]:
    """Brute-force verdict over raw trees; mirrors the published verdict shape."""
    outcomes = []
    blocked = False
    flagged = []
    for rule in sorted(rules_tree["rules"], key=lambda r: r["rule_id"]):
        if rule["applies_to"] != kind:
            continue
        fired = _oracle_predicate(rule["when"], doc_tree, target, kind)
        result = rule["flag"] if fired else "pass"
        outcomes.append({"rule_id": rule["rule_id"], "result": result})
        if fired:
            flagged.append(f"{rule['rule_id']}:{result}")
            if rule["flag"] in ("contraindication", "red_flag"):
                blocked = True
    return {
        "target_kind": kind,
        "target_id": target["id"],
        "outcomes": outcomes,
        "overall": "blocked" if blocked else "validated",
        "notes": "; ".join(flagged) or "all rules passed",
    }


# -- random ledgers and bit-flip tampering ------------------------------------------


def random_ledger(rng: random.Random, path=None) -> Ledger:
    doc_id = f"MCP-RND-{rng.randrange(1000)}"
    ledger = Ledger(doc_id, path=path)
    moment = datetime(2025, 1, 1, tzinfo=UTC)
    n = rng.randint(1, 50)
    kinds = [k for k in EVENT_KINDS if k not in ("handoff_out",)]
    for i in range(n):
        kind = "ingested" if i == 0 else rng.choice(kinds)
        actor = rng.choice(
            (ENGINE, Actor("module", "gen-template/1"), Actor("agent", "lab-order"), Actor("physician", "dr-chen"))
        )
        detail = (
            f"tasks=t-a:proposed,t-b:draft"
            if kind in ("ingested", "handoff_in")
            else f"task=t-{rng.randrange(9)} from=proposed to=pending_verification"
        )
        ledger.append(
            timestamp=moment + timedelta(minutes=i),
            document_version=1 + i // 3,
            actor=actor,
            event_kind=kind,
            payload_digest=_rng_hex(rng),
            detail=detail,
        )
    return ledger


def flip_detected_at_or_before(
    original_lines: list[str], event_index: int, flipped_line: bytes
) -> bool:
    """True when tampering with one stored event line cannot go unnoticed.

    Detection means either the line no longer loads (malformed JSON, schema,
    encoding) or the chain check fails at ``event_index`` or earlier. Events
    before the tampered line are untouched, so the chain up to it still
    verifies; the check therefore reduces to this line's own fields.
    """
    try:
        tree = json.loads(flipped_line.decode("utf-8"))
        event = AuditEvent.from_tree(tree)
    except (McpError, ValueError, json.JSONDecodeError, UnicodeDecodeError):
        return True
    original = json.loads(original_lines[event_index + 1])
    if event.seq != event_index:
        return True
    if event.prev_hash != original["prev_hash"]:
        return True
    return compute_event_hash(event.prev_hash, event.body_bytes()) != event.this_hash


# -- exhaustive engine exploration ---------------------------------------------------


@dataclass
class ScriptedAgent:
    """Agent whose outcome per task id is dictated by the exploration driver."""

    outcomes: dict[str, str] = field(default_factory=dict)
    agent_id: str = "scripted"

    def execute(self, task, ctx) -> AgentResult:
        status = self.outcomes.get(task.id, "completed")
        return AgentResult(task_id=task.id, status=status, info={"mode": status})


def scripted_registry(agent: ScriptedAgent) -> AgentRegistry:
    registry = AgentRegistry()
    for kind in TaskKind:
        registry.register(kind, agent)
    return registry


def make_task(
    tid: str,
    kind: str = "evaluation",
    state: str = "proposed",
    confidence: float = 0.9,
    requires_approval: bool = False,
    depends_on: list[str] | None = None,
    fallback_task: str | None = None,
) -> dict[str, Any]:
    return {
        "id": tid,
        "kind": kind,
        "payload": dict(_PAYLOAD_TEMPLATES[kind]),
        "state": state,
        "confidence": confidence,
        "requires_approval": requires_approval,
        "depends_on": list(depends_on or []),
        "fallback_task": fallback_task,
    }


def make_document(doc_id: str, tasks: list[dict[str, Any]], **overrides: Any) -> McpDocument:
    tree = {
        "header": {
            "schema_version": "mcp/1",
            "id": doc_id,
            "version": 1,
            "created_at": "2025-03-02T09:00:00Z",
            "parent_hash": "0" * 64,
        },
        "demographics": {"patient_id": "P-1", "age_years": "40"},
        "observations": [],
        "history_notes": [],
        "objectives": [],
        "hypotheses": [],
        "task_plan": tasks,
        "reasoning_log": [],
        "verification": [],
    }
    tree.update(overrides)
    return McpDocument.from_tree(tree)


def exploration_fixtures() -> list[tuple[str, McpDocument]]:
    """Start documents for state-space exploration; every plan has <= 4 tasks."""
    return [
        ("empty-plan", make_document("MCP-EXP-0", [])),
        (
            "soft-auto",
            make_document(
                "MCP-EXP-1",
                [
                    make_task("t-eval", "evaluation", confidence=0.95),
                    make_task("t-low", "evaluation", confidence=0.5),
                ],
            ),
        ),
        (
            "hard-gate-chain",
            make_document(
                "MCP-EXP-2",
                [
                    make_task("t-lab", "lab_order", requires_approval=True),
                    make_task("t-ref", "referral", requires_approval=True, depends_on=["t-lab"]),
                    make_task("t-follow", "follow_up", state="draft", depends_on=["t-ref"]),
                ],
            ),
        ),
        (
            "fallback-pair",
            make_document(
                "MCP-EXP-3",
                [
                    make_task("t-med", "medication_change", requires_approval=True, fallback_task="t-alt"),
                    make_task("t-alt", "evaluation", state="draft"),
                    make_task("t-extra", "evaluation", requires_approval=True),
                ],
            ),
        ),
        (
            "mixed-four",
            make_document(
                "MCP-EXP-4",
                [
                    make_task("t-a", "lab_order", requires_approval=True, fallback_task="t-d"),
                    make_task("t-b", "evaluation", confidence=0.85, depends_on=["t-a"]),
                    make_task("t-c", "follow_up", state="draft", depends_on=["t-b"]),
                    make_task("t-d", "evaluation", state="draft"),
                ],
            ),
        ),
    ]


@dataclass
class ExplorationStats:
    states: int = 0
    edges: int = 0


def _state_key(doc: McpDocument) -> tuple:
    states = tuple(sorted((t.id, t.state.value) for t in doc.task_plan))
    records = tuple(sorted((r.task_id, r.decision.value) for r in doc.verification))
    return states, records


def _assert_edge_invariants(doc: McpDocument, ledger: Ledger, transitions, events) -> None:
    for tid, src, dst in transitions:
        pair = (TaskState(src), TaskState(dst))
        assert pair in LEGAL_TRANSITIONS, f"illegal transition {tid}: {src}->{dst}"
    moved = [(t[0], t[2]) for t in transitions]
    seen = []
    for event in events:
        fields = dict(p.split("=", 1) for p in event.detail.split() if "=" in p)
        if "task" in fields and "to" in fields:
            seen.append((fields["task"], fields["to"]))
    assert moved == seen, f"transition/event mismatch: {moved} vs {seen}"

    approved_ok = {r.task_id for r in doc.verification if r.decision.value in ("approve", "modify")}
    for task in doc.task_plan:
        if task.requires_approval and task.state in (TaskState.EXECUTING, TaskState.COMPLETED):
            assert task.id in approved_ok, f"{task.id} ran without approval"

    proof = verify_chain(ledger.events())
    assert isinstance(proof, LedgerProof), f"chain broke: {proof}"
    snap = EngineStateSnapshotCompare(doc, ledger)
    assert snap.matches(), snap.describe()


class EngineStateSnapshotCompare:
    def __init__(self, doc: McpDocument, ledger: Ledger):
        from mcpcare.snapshot import EngineStateSnapshot

        self.replayed = replay(ledger.events())
        self.direct = EngineStateSnapshot.build(
            document_id=doc.header.id,
            document_version=doc.header.version,
            task_states={t.id: t.state.value for t in doc.task_plan},
            timeline_length=len(ledger),
        )

    def matches(self) -> bool:
        return self.replayed == self.direct

    def describe(self) -> str:
        return f"replay {self.replayed.to_tree()}\nvs     {self.direct.to_tree()}"


def explore(doc: McpDocument, policy: GatePolicy | None = None) -> ExplorationStats:
    """Breadth-first search over every reachable engine state.

    Branches: one advance per agent-outcome assignment over the tasks that
    round actually dispatches, plus every decision on every pending task.
    Each edge is checked for legal transitions, the event/transition pairing,
    approval safety, replayability, and chain integrity.
    """
    clock = fixed_clock()
    agent = ScriptedAgent()
    engine = TaskEngine(policy or GatePolicy(), scripted_registry(agent), clock)

    def fresh_ledger(events) -> Ledger:
        return Ledger.from_events(doc.header.id, events)

    root_ledger = Ledger(doc.header.id)
    root_ledger.append(
        timestamp=clock.now(),
        document_version=doc.header.version,
        actor=ENGINE,
        event_kind="ingested",
        payload_digest=document_hash(doc),
        detail=f"tasks={encode_task_map({t.id: t.state.value for t in doc.task_plan})}",
    )

    stats = ExplorationStats()
    seen = {_state_key(doc)}
    frontier: list[tuple[McpDocument, tuple]] = [(doc, root_ledger.events())]

    while frontier:
        current, events = frontier.pop()
        stats.states += 1

        moves: list[Callable[[Ledger], McpDocument]] = []

        # Discover which tasks this round would dispatch, then branch over
        # every success/failure assignment for exactly those tasks.
        agent.outcomes = {}
        probe = engine.advance(current, fresh_ledger(events))
        dispatched = sorted({t[0] for t in probe.transitions if t[2] == "executing"})
        for assignment in itertools.product(("completed", "failed"), repeat=len(dispatched)):
            outcome = dict(zip(dispatched, assignment))

            def run_advance(ledger: Ledger, outcome=outcome) -> McpDocument:
                agent.outcomes = outcome
                result = engine.advance(current, ledger)
                _assert_edge_invariants(result.document, ledger, result.transitions, result.events)
                return result.document

            moves.append(run_advance)

        for task in current.task_plan:
            if task.state is not TaskState.PENDING_VERIFICATION:
                continue
            for decision in ("approve", "reject", "modify"):
                modification = None
                if decision == "modify":
                    modification = dict(task.payload)
                    modification["note"] = "adjusted"

                def run_decision(
                    ledger: Ledger, task_id=task.id, decision=decision, modification=modification
                ) -> McpDocument:
                    before = {t.id: t.state.value for t in current.task_plan}
                    changed = engine.apply_decision(
                        current,
                        ledger,
                        task_id=task_id,
                        decision=decision,
                        actor_id="dr-explore",
                        modification=modification,
                    )
                    after = {t.id: t.state.value for t in changed.task_plan}
                    transitions = [
                        (tid, before[tid], after[tid]) for tid in before if before[tid] != after[tid]
                    ]
                    _assert_edge_invariants(changed, ledger, transitions, ledger.events()[-1:])
                    return changed

                moves.append(run_decision)

        for move in moves:
            ledger = fresh_ledger(events)
            next_doc = move(ledger)
            stats.edges += 1
            key = _state_key(next_doc)
            if key not in seen:
                seen.add(key)
                frontier.append((next_doc, ledger.events()))

    return stats


# -- live gateway server --------------------------------------------------------------


class GatewayServer:
    """uvicorn on an ephemeral loopback port, run in a daemon thread."""

    def __init__(self, app: Any):
        self._config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        while not self._server.started:
            if not self._thread.is_alive():
                raise RuntimeError("gateway server failed to start")
            threading.Event().wait(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc_info: Any) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)


def iter_documents(rng: random.Random, count: int) -> Iterator[dict[str, Any]]:
    for _ in range(count):
        yield random_document_tree(rng)
