"""Acceptance gate: one test per shipping criterion, at stated tolerances."""
from __future__ import annotations

import json
import random
import threading
import time
from datetime import timedelta
from fractions import Fraction

import httpx

import support
from mcpcare.document.changes import apply_changeset, diff
from mcpcare.document.model import McpDocument, parse_document, serialize_document
from mcpcare.errors import McpError
from mcpcare.gateway.app import create_app
from mcpcare.gateway.clock import FixedClock
from mcpcare.gateway.runtime import build_runtime, ingest_document
from mcpcare.gateway.scenario import ScenarioRunner
from mcpcare.jsoncanon import canonical_bytes, parse_timestamp
from mcpcare.ledger import ChainBreak, Ledger, verify_chain
from mcpcare.modules.scoring import EngagementHistory, adherence_score, project_trajectory
from mcpcare.replay import replay


def test_format_round_trip_1000_documents_under_10_seconds():
    rng = random.Random(20250302)
    started = time.monotonic()
    failures = 0
    for _ in range(1000):
        tree = support.random_document_tree(rng)
        raw = canonical_bytes(tree)
        if serialize_document(parse_document(raw)) != raw:
            failures += 1
    elapsed = time.monotonic() - started
    assert failures == 0
    assert elapsed < 10.0, f"round-trip run took {elapsed:.2f}s"


def test_diff_apply_inverse_on_500_document_pairs():
    rng = random.Random(47)
    failures = 0
    for _ in range(500):
        tree_a = support.random_document_tree(rng)
        tree_b = support.random_mutations(rng, tree_a)
        a = McpDocument.from_tree(tree_a)
        b = McpDocument.from_tree(tree_b)
        patched = apply_changeset(a, diff(a, b))
        if serialize_document(patched) != serialize_document(b):
            failures += 1
    assert failures == 0


def test_tamper_evidence_every_bit_flip_of_100_random_events(tmp_path):
    rng = random.Random(9091)
    misses = 0
    flips = 0
    full_stack_checks = 0
    for case in range(100):
        ledger = support.random_ledger(rng)
        events = ledger.events()
        header = canonical_bytes(
            {"format": "mcp-ledger/1", "document_id": ledger.document_id}
        ).decode("utf-8")
        lines = [header] + [
            canonical_bytes(e.to_tree()).decode("utf-8") for e in events
        ]
        idx = rng.randrange(len(events))
        target = lines[idx + 1].encode("utf-8")
        for byte_pos in range(len(target)):
            for bit in range(8):
                flipped = bytearray(target)
                flipped[byte_pos] ^= 1 << bit
                flipped = bytes(flipped)
                flips += 1
                if not support.flip_detected_at_or_before(lines, idx, flipped):
                    misses += 1
                if flips % 97 == 0:
                    # spot-check that the full load/verify stack agrees
                    path = tmp_path / f"case-{case}.ledger.jsonl"
                    body = [line.encode("utf-8") for line in lines]
                    body[idx + 1] = flipped
                    path.write_bytes(b"\n".join(body) + b"\n")
                    full_stack_checks += 1
                    try:
                        loaded = Ledger.load(path)
                    except (McpError, ValueError):
                        continue
                    proof = verify_chain(loaded.events())
                    assert isinstance(proof, ChainBreak) and proof.seq <= idx, (
                        f"full stack missed a flip at event {idx}"
                    )
    assert misses == 0, f"{misses} undetected flips out of {flips}"
    assert flips > 100_000
    assert full_stack_checks > 500


def test_safety_invariant_holds_across_exhaustive_exploration():
    candidates = [doc for _, doc in support.exploration_fixtures()]
    for name in ("fxs-013", "chronic-225"):
        runtime = build_runtime(clock=support.fixed_clock())
        from mcpcare import fixtures

        scenario = fixtures.load_scenario(name)
        doc = McpDocument.from_tree(scenario["document"])
        ledger = ingest_document(runtime.store, doc, runtime.clock)
        candidates.append(runtime.orchestrator.incorporate(doc, ledger).document)

    docs = [doc for doc in candidates if len(doc.task_plan) <= 4]
    assert any(doc.header.id == "MCP-FXS-013" for doc in docs)

    started = time.monotonic()
    total_states = 0
    total_edges = 0
    for doc in docs:
        # explore() asserts, on every edge: legal transitions only, events
        # matching transitions, no unapproved requires_approval task ever
        # executing or completed, chain verification, and replay equality.
        stats = support.explore(doc)
        total_states += stats.states
        total_edges += stats.edges
    elapsed = time.monotonic() - started
    assert total_states > 200
    assert total_edges >= total_states - len(docs)
    assert elapsed < 60.0, f"exploration took {elapsed:.2f}s"


def _run_episode(scenario):
    """Execute a scenario's steps, keeping both runtimes for inspection."""
    clock = FixedClock(parse_timestamp(scenario["clock_start"]))
    sender = build_runtime(clock=clock)
    receiver = build_runtime(clock=clock)
    doc = McpDocument.from_tree(scenario["document"])
    doc_id = doc.header.id
    package = []
    for step in scenario["steps"]:
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
                    task_id=step["task_id"], decision=step["decision"],
                    actor_id=step["actor"], note=step.get("note", ""),
                    modification=step.get("modification"),
                ),
            )
        elif op == "handoff":
            from mcpcare.agents.handoff import prepare_handoff

            def seal(head, ledger):
                package.append(prepare_handoff(
                    head, ledger,
                    from_provider=step["from_provider"],
                    to_provider=step["to_provider"],
                    clock=clock,
                    allow_pending=bool(step.get("allow_pending", False)),
                ))
                return head

            sender.store.mutate(doc_id, None, seal)
        elif op == "accept":
            from mcpcare.agents.handoff import accept_handoff

            accepted, ledger = accept_handoff(
                package[-1], existing_ids=receiver.store.ids(), clock=clock
            )
            receiver.store.install(accepted, ledger)
    return sender, receiver, doc_id


def test_replay_equals_final_snapshot_byte_for_byte(fxs_scenario, chronic_scenario):
    for scenario in (fxs_scenario, chronic_scenario):
        sender, receiver, doc_id = _run_episode(scenario)
        for runtime in (sender, receiver):
            if not runtime.store.exists(doc_id):
                continue
            head = runtime.store.head(doc_id)
            ledger = runtime.store.ledger(doc_id)
            replayed = replay(ledger.events())
            direct = runtime.engine.snapshot(head, ledger)
            assert replayed.canonical() == direct.canonical()


def test_rule_verdicts_match_brute_force_on_200_random_documents(rules, rules_tree):
    from mcpcare.modules.guidelines import GuidelineRuleEngine

    rng = random.Random(606)
    engine = GuidelineRuleEngine(rules)
    divergences = 0
    checked = 0
    for _ in range(200):
        tree = support.random_document_tree(rng)
        doc = McpDocument.from_tree(tree)
        targets = list(doc.task_plan) + list(doc.hypotheses)
        verdicts = engine.validate_targets(doc, targets)
        for target, verdict in zip(targets, verdicts):
            kind = "task" if target in doc.task_plan else "hypothesis"
            bucket = tree["task_plan"] if kind == "task" else tree["hypotheses"]
            raw = next(e for e in bucket if e["id"] == target.id)
            expected = support.oracle_verdict(tree, raw, kind, rules_tree)
            checked += 1
            if verdict.to_tree() != expected:
                divergences += 1
    assert divergences == 0, f"{divergences} of {checked} verdicts diverged"
    assert checked > 200


def _episode_blob(report) -> bytes:
    return canonical_bytes({
        "summary": report.summary(),
        "receiver": report.receiver_snapshot.to_tree() if report.receiver_snapshot else None,
        "schedule": [
            [e.document_id, e.task_id, e.procedure, e.due_at.isoformat()]
            for e in report.schedule
        ],
        "orders": report.fhir_orders,
    })


def test_scenario_fxs_013_reproduces_its_golden_trace(fxs_scenario):
    blobs = set()
    for _ in range(3):
        report = ScenarioRunner(fxs_scenario).run()
        assert report.passed, f"diverged at {report.first_divergence}: {report.trace}"
        assert report.trace == [list(t) for t in fxs_scenario["expected_trace"]]
        blobs.add(_episode_blob(report))

        order = next(o for o in report.fhir_orders if o["code"] == {"text": "FMR1"})
        assert order["resourceType"] == "ServiceRequest"
        start = parse_timestamp(fxs_scenario["clock_start"])
        entry = next(e for e in report.schedule if e.procedure == "EEG")
        assert entry.due_at == start + timedelta(days=21)
    assert len(blobs) == 1, "scenario runs were not deterministic"


def test_scenario_chronic_225_blocks_and_hands_off(chronic_scenario):
    blobs = set()
    for _ in range(3):
        report = ScenarioRunner(chronic_scenario).run()
        assert report.passed, f"diverged at {report.first_divergence}: {report.trace}"
        assert report.trace == [list(t) for t in chronic_scenario["expected_trace"]]
        assert report.continuity_ok is True
        assert (
            report.receiver_snapshot.continuity_view()
            == report.final_snapshot.continuity_view()
        )
        blobs.add(_episode_blob(report))
    assert len(blobs) == 1, "scenario runs were not deterministic"

    # the scripted eGFR of 25 must have produced the contraindication verdict
    sender, _, doc_id = _run_episode(chronic_scenario)
    head = sender.store.head(doc_id)
    egfr = next(o for o in head.observations if o.code == "EGFR")
    assert egfr.value == 25
    blocked = next(
        e for e in head.reasoning_log
        if e.action == "validate target=t-chronic-metformin-titrate overall=blocked"
    )
    assert "renal-metformin-contraindication:contraindication" in blocked.rationale
    assert head.task("t-chronic-metformin-titrate").state.value == "rejected"


def test_numeric_scoring_matches_exact_arithmetic():
    exact = Fraction(9 + 1, 10 + 2)
    assert abs(adherence_score(EngagementHistory(9, 10)) - exact) <= 1e-12
    assert adherence_score(EngagementHistory(0, 0)) == 0.5

    days = [0, 3, 7, 11, 20, 33]
    slope, intercept, horizon = 0.5, 7.0, 90.0
    doc = support.make_document("MCP-NUM-1", [], observations=[
        {
            "code": "A1C", "value": slope * d + intercept, "unit": "%",
            "source": "ehr",
            "timestamp": (support.CLOCK_START + timedelta(days=d)).strftime(
                "%Y-%m-%dT%H:%M:%SZ"
            ),
        }
        for d in days
    ])
    projection = project_trajectory(doc, "A1C", horizon)
    expected = slope * (days[-1] + horizon) + intercept
    assert abs(projection.slope_per_day - slope) / slope <= 1e-9
    assert abs(projection.intercept - intercept) / intercept <= 1e-9
    assert abs(projection.projected_value - expected) / expected <= 1e-9
    assert projection.points_used == len(days)
    assert projection.method_id == "ols-linear/1"


def test_eight_concurrent_writers_one_winner_over_http():
    runtime = build_runtime(clock=support.fixed_clock())
    app = create_app(runtime)
    doc = support.make_document("MCP-CC-1", [support.make_task("t-a")])
    headers = {"Authorization": "Bearer tok-engineer-ruiz"}

    with support.GatewayServer(app) as base_url:
        created = httpx.post(f"{base_url}/documents", json=doc.to_tree(), headers=headers)
        assert created.status_code == 201

        barrier = threading.Barrier(8)
        statuses: list[tuple[int, dict]] = []
        lock = threading.Lock()

        def write(n: int) -> None:
            body = {"observations": [{
                "code": "EGFR", "value": 40 + n, "unit": "mL/min",
                "source": "ehr", "timestamp": "2025-03-02T10:00:00Z",
            }]}
            barrier.wait()
            reply = httpx.post(
                f"{base_url}/documents/MCP-CC-1/observations",
                json=body,
                headers={**headers, "X-Expected-Version": "1"},
                timeout=30,
            )
            with lock:
                statuses.append((reply.status_code, reply.json()))

        threads = [threading.Thread(target=write, args=(n,)) for n in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        codes = sorted(code for code, _ in statuses)
        assert codes == [200] + [409] * 7, codes
        for code, body in statuses:
            if code == 409:
                assert body["detail"] == {
                    "error": "version_conflict", "expected": 1, "actual": 2,
                }

        audit = httpx.get(f"{base_url}/documents/MCP-CC-1/audit", headers=headers)
        verification = audit.json()["verification"]
        assert verification["ok"] is True
        assert verification["length"] == 2  # ingest plus the single winning write
