"""Record real gateway traffic into the dashboard's contract fixtures.

Boots the mcpcare gateway on a loopback socket, drives the exact request
sequences the dashboard issues, and captures every exchange verbatim into
test/recordings/*.json. Re-run after any gateway change:

    python3 scripts/record.py

Requires the mcpcare package (pip install -e .. --no-build-isolation).
"""
from __future__ import annotations

import json
import shutil
import tempfile
import threading
from pathlib import Path
from typing import Any

import httpx
import uvicorn

from mcpcare import fixtures
from mcpcare.gateway.app import create_app
from mcpcare.gateway.clock import FixedClock
from mcpcare.gateway.runtime import build_runtime
from mcpcare.jsoncanon import parse_timestamp

RECORDINGS = Path(__file__).resolve().parent.parent / "test" / "recordings"

PHYSICIAN = "tok-physician-chen"
ENGINEER = "tok-engineer-ruiz"
AUDITOR = "tok-auditor-kim"

GENESIS = "0" * 64


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


class Recorder:
    """Performs requests and keeps request/response pairs for replay.

    Only the headers the dashboard sends deliberately are recorded
    (authorization, x-expected-version); the replay transport matches on
    exactly these.
    """

    def __init__(self, base_url: str):
        self.base_url = base_url
        self.exchanges: list[dict[str, Any]] = []

    def _perform(
        self,
        method: str,
        path: str,
        *,
        token: str | None,
        expected_version: int | None = None,
        body: Any = None,
        record: bool = True,
    ) -> httpx.Response:
        headers: dict[str, str] = {}
        if token is not None:
            headers["authorization"] = f"Bearer {token}"
        if expected_version is not None:
            headers["x-expected-version"] = str(expected_version)
        response = httpx.request(
            method,
            self.base_url + path,
            headers=headers,
            json=body if body is not None else None,
            timeout=30,
        )
        if record:
            request: dict[str, Any] = {"method": method, "path": path, "headers": headers}
            if body is not None:
                request["body"] = body
            self.exchanges.append(
                {"request": request, "response": {"status": response.status_code, "body": response.json()}}
            )
        return response

    def get(self, path: str, *, token: str | None, record: bool = True) -> httpx.Response:
        return self._perform("GET", path, token=token, record=record)

    def post(
        self,
        path: str,
        body: Any,
        *,
        token: str | None,
        expected_version: int | None = None,
        record: bool = True,
    ) -> httpx.Response:
        return self._perform(
            "POST", path, token=token, expected_version=expected_version, body=body, record=record
        )

    def save(self, name: str) -> None:
        target = RECORDINGS / name
        target.write_text(json.dumps({"exchanges": self.exchanges}, indent=2) + "\n")
        print(f"wrote {target.name}: {len(self.exchanges)} exchanges")


def runtime_for(scenario_id: str, root: Path | None = None) -> tuple[Any, dict[str, Any]]:
    scenario = fixtures.load_scenario(scenario_id)
    clock = FixedClock(parse_timestamp(scenario["clock_start"]))
    return build_runtime(root=root, clock=clock), scenario


def ingest_and_advance(rec: Recorder, document: dict[str, Any]) -> str:
    """Unrecorded setup: put a document into the gateway and drain the engine."""
    document_id = document["header"]["id"]
    created = rec.post("/documents", document, token=PHYSICIAN, record=False)
    assert created.status_code == 201, created.text
    advanced = rec.post(f"/documents/{document_id}/advance", None, token=PHYSICIAN, record=False)
    assert advanced.status_code == 200, advanced.text
    return document_id


def view_queue(rec: Recorder, *, token: str | None) -> list[dict[str, Any]]:
    """The dashboard's queue sequence: list documents, then each pending set."""
    listing = rec.get("/documents", token=token)
    if listing.status_code != 200:
        return []
    responses = []
    for document_id in listing.json()["documents"]:
        responses.append(rec.get(f"/documents/{document_id}/pending", token=token).json())
    return responses


def view_trace(rec: Recorder, document_id: str, *, token: str) -> None:
    rec.get(f"/documents/{document_id}/audit", token=token)
    rec.get(f"/documents/{document_id}", token=token)


def decision_body(task_id: str, decision: str, note: str = "", modification: Any = None) -> dict[str, Any]:
    body: dict[str, Any] = {"task_id": task_id, "decision": decision, "note": note}
    if modification is not None:
        body["modification"] = modification
    return body


# -- recordings ---------------------------------------------------------------


def record_queue_fxs() -> None:
    runtime, scenario = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        ingest_and_advance(rec, scenario["document"])
        view_queue(rec, token=PHYSICIAN)
        rec.save("queue-fxs.json")


def record_queue_empty() -> None:
    runtime, _ = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        view_queue(rec, token=PHYSICIAN)
        rec.save("queue-empty.json")


def record_queue_unauthorized() -> None:
    runtime, _ = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        view_queue(rec, token=None)
        rec.save("queue-unauthorized.json")


def record_decide_approve() -> None:
    runtime, scenario = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        document_id = ingest_and_advance(rec, scenario["document"])
        pending = view_queue(rec, token=PHYSICIAN)
        version = pending[0]["version"]
        rec.post(
            f"/documents/{document_id}/decisions",
            decision_body("t-fxs-fmr1-lab", "approve"),
            token=PHYSICIAN,
            expected_version=version,
        )
        rec.get(f"/documents/{document_id}/pending", token=PHYSICIAN)
        view_trace(rec, document_id, token=PHYSICIAN)
        rec.save("decide-approve.json")


def record_decide_modify() -> None:
    runtime, scenario = runtime_for("chronic-225")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        document_id = ingest_and_advance(rec, scenario["document"])
        pending = view_queue(rec, token=PHYSICIAN)
        version = pending[0]["version"]
        rec.post(
            f"/documents/{document_id}/decisions",
            decision_body(
                "t-chronic-metformin-titrate",
                "modify",
                note="start at a lower titration target",
                modification={
                    "drug": "metformin",
                    "change": "titrate to 1000mg daily",
                    "reason": "suboptimal glycemic control",
                },
            ),
            token=PHYSICIAN,
            expected_version=version,
        )
        rec.get(f"/documents/{document_id}/pending", token=PHYSICIAN)
        view_trace(rec, document_id, token=PHYSICIAN)
        rec.save("decide-modify.json")


def record_decide_conflict() -> None:
    runtime, scenario = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        document_id = ingest_and_advance(rec, scenario["document"])
        pending = view_queue(rec, token=PHYSICIAN)
        version = pending[0]["version"]
        # Another writer lands an observation between render and decision.
        bump = rec.post(
            f"/documents/{document_id}/observations",
            {
                "observations": [
                    {
                        "code": "BEHAV_DIST",
                        "value": "new outburst at school",
                        "unit": "",
                        "source": "clinician",
                        "timestamp": "2025-03-02T08:30:00Z",
                    }
                ]
            },
            token=ENGINEER,
            record=False,
        )
        assert bump.status_code == 200, bump.text
        conflict = rec.post(
            f"/documents/{document_id}/decisions",
            decision_body("t-fxs-fmr1-lab", "approve"),
            token=PHYSICIAN,
            expected_version=version,
        )
        assert conflict.status_code == 409, conflict.text
        rec.get(f"/documents/{document_id}/pending", token=PHYSICIAN)
        rec.save("decide-conflict.json")


def record_decide_forbidden() -> None:
    runtime, scenario = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        document_id = ingest_and_advance(rec, scenario["document"])
        pending = view_queue(rec, token=AUDITOR)
        version = pending[0]["version"]
        denied = rec.post(
            f"/documents/{document_id}/decisions",
            decision_body("t-fxs-fmr1-lab", "approve"),
            token=AUDITOR,
            expected_version=version,
        )
        assert denied.status_code == 403, denied.text
        rec.save("decide-forbidden.json")


def what_if_document() -> dict[str, Any]:
    """A plan with a fallback pair: reject the titration, the alternative wakes."""
    return {
        "header": {
            "schema_version": "mcp/1",
            "id": "MCP-WIF-1",
            "version": 1,
            "created_at": "2025-03-02T09:00:00Z",
            "parent_hash": GENESIS,
        },
        "demographics": {"patient_id": "P-WIF-1", "age_years": "61"},
        "observations": [
            {
                "code": "SBP",
                "value": 158,
                "unit": "mmHg",
                "source": "clinician",
                "timestamp": "2025-03-01T10:00:00Z",
            }
        ],
        "history_notes": [],
        "objectives": [],
        "hypotheses": [],
        "task_plan": [
            {
                "id": "t-plan-a",
                "kind": "medication_change",
                "payload": {
                    "drug": "lisinopril",
                    "change": "increase to 20mg daily",
                    "reason": "persistent hypertension",
                },
                "state": "pending_verification",
                "confidence": 0.7,
                "requires_approval": True,
                "depends_on": [],
                "fallback_task": "t-plan-b",
            },
            {
                "id": "t-plan-b",
                "kind": "medication_change",
                "payload": {
                    "drug": "amlodipine",
                    "change": "start 5mg daily",
                    "reason": "alternative when titration is declined",
                },
                "state": "draft",
                "confidence": 0.7,
                "requires_approval": True,
                "depends_on": [],
                "fallback_task": None,
            },
        ],
        "reasoning_log": [],
        "verification": [],
    }


def record_what_if() -> None:
    runtime, _ = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        document = what_if_document()
        document_id = document["header"]["id"]
        created = rec.post("/documents", document, token=PHYSICIAN, record=False)
        assert created.status_code == 201, created.text
        view_queue(rec, token=PHYSICIAN)
        view_trace(rec, document_id, token=PHYSICIAN)
        for _ in range(2):
            rec.post(
                f"/documents/{document_id}/simulate",
                decision_body("t-plan-a", "reject"),
                token=PHYSICIAN,
            )
        rec.post(
            f"/documents/{document_id}/simulate",
            decision_body("t-plan-a", "approve"),
            token=PHYSICIAN,
        )
        view_trace(rec, document_id, token=PHYSICIAN)
        rec.save("whatif-fallback.json")


def record_timeline_clean() -> None:
    runtime, scenario = runtime_for("fxs-013")
    with GatewayServer(create_app(runtime)) as base:
        rec = Recorder(base)
        document_id = ingest_and_advance(rec, scenario["document"])
        for task_id in ("t-fxs-fmr1-lab", "t-fxs-genetics-referral", "t-fxs-behavioral-eval"):
            approved = rec.post(
                f"/documents/{document_id}/decisions",
                decision_body(task_id, "approve"),
                token=PHYSICIAN,
                record=False,
            )
            assert approved.status_code == 200, approved.text
        advanced = rec.post(f"/documents/{document_id}/advance", None, token=PHYSICIAN, record=False)
        assert advanced.status_code == 200, advanced.text
        view_trace(rec, document_id, token=PHYSICIAN)
        rec.save("timeline-clean.json")


def record_timeline_tampered() -> None:
    root = Path(tempfile.mkdtemp(prefix="mcpcare-record-"))
    try:
        runtime, scenario = runtime_for("chronic-225", root=root)
        document = scenario["document"]
        document_id = document["header"]["id"]
        with GatewayServer(create_app(runtime)) as base:
            rec = Recorder(base)
            created = rec.post("/documents", document, token=PHYSICIAN, record=False)
            assert created.status_code == 201, created.text
            bump = rec.post(
                f"/documents/{document_id}/observations",
                {
                    "observations": [
                        {
                            "code": "EGFR",
                            "value": 41,
                            "unit": "mL/min",
                            "source": "ehr",
                            "timestamp": "2025-06-09T08:00:00Z",
                        }
                    ]
                },
                token=PHYSICIAN,
                record=False,
            )
            assert bump.status_code == 200, bump.text

        ledger_path = root / "ledgers" / f"{document_id}.ledger.jsonl"
        lines = ledger_path.read_text().splitlines()
        # Header line, then events; doctor the second event's detail.
        assert "t-chronic-a1c-draw:failed" in lines[2]
        lines[2] = lines[2].replace("t-chronic-a1c-draw:failed", "t-chronic-a1c-draw:passed")
        ledger_path.write_text("\n".join(lines) + "\n")

        reloaded, _ = runtime_for("chronic-225", root=root)
        with GatewayServer(create_app(reloaded)) as base:
            rec = Recorder(base)
            view_trace(rec, document_id, token=PHYSICIAN)
            rec.save("timeline-tampered.json")
    finally:
        shutil.rmtree(root, ignore_errors=True)


def main() -> None:
    RECORDINGS.mkdir(parents=True, exist_ok=True)
    record_queue_fxs()
    record_queue_empty()
    record_queue_unauthorized()
    record_decide_approve()
    record_decide_modify()
    record_decide_conflict()
    record_decide_forbidden()
    record_what_if()
    record_timeline_clean()
    record_timeline_tampered()


if __name__ == "__main__":
    main()
