"""Lab-order execution against a FHIR-style ServiceRequest endpoint.

Ships with an in-process mock endpoint, a stdlib HTTP wrapper around it, and
an httpx transport, so the retry and dedup behavior can be exercised both
in-memory and over a real socket.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Protocol

import httpx

from mcpcare.agents import AgentContext, AgentResult
from mcpcare.document.model import McpDocument, TaskSpec
from mcpcare.errors import EndpointUnreachable, InvalidPayload, SchemaRejected
from mcpcare.jsoncanon import format_timestamp, parse_timestamp

SERVICE_REQUEST_PATH = "/fhir/ServiceRequest"


def subject_reference(doc: McpDocument) -> str:
    """Patient reference for outbound resources; patient_id wins over doc id."""
    return doc.demographics.get("patient_id") or doc.header.id


def build_service_request(task: TaskSpec, subject: str, authored_on) -> dict[str, Any]:
    test_code = task.payload.get("test_code")
    reason = task.payload.get("reason")
    if not isinstance(test_code, str) or not test_code:
        raise InvalidPayload(f"{task.id}: test_code must be a non-empty string")
    if not isinstance(reason, str) or not reason:
        raise InvalidPayload(f"{task.id}: reason must be a non-empty string")
    return {
        "resourceType": "ServiceRequest",
        "id": task.id,
        "status": "active",
        "intent": "order",
        "code": {"text": test_code},
        "subject": {"reference": f"Patient/{subject}"},
        "authoredOn": format_timestamp(authored_on),
        "reasonCode": [{"text": reason}],
    }


def check_service_request(resource: Any) -> list[str]:
    """Shape problems in an incoming resource; empty means acceptable."""
    problems: list[str] = []
    if not isinstance(resource, dict):
        return ["resource is not an object"]
    if resource.get("resourceType") != "ServiceRequest":
        problems.append("resourceType must be ServiceRequest")
    if not isinstance(resource.get("id"), str) or not resource.get("id"):
        problems.append("id missing")
    if resource.get("status") not in ("active", "draft", "on-hold"):
        problems.append("status unsupported")
    if resource.get("intent") != "order":
        problems.append("intent must be order")
    code = resource.get("code")
    if not isinstance(code, dict) or not code.get("text"):
        problems.append("code.text missing")
    subject = resource.get("subject")
    if not isinstance(subject, dict) or not str(subject.get("reference", "")).strip():
        problems.append("subject.reference missing")
    try:
        parse_timestamp(resource.get("authoredOn", ""))
    except ValueError:
        problems.append("authoredOn not a timestamp")
    return problems


class Transport(Protocol):
    def post_service_request(self, resource: dict[str, Any]) -> dict[str, Any]: ...


@dataclass
class MockFhirEndpoint:
    """Accepts well-formed ServiceRequests; same resource id never orders twice."""

    fail_next: int = 0
    _orders: list[dict[str, Any]] = field(default_factory=list)
    _assigned: dict[str, str] = field(default_factory=dict)
    _counter: int = 0

    def post_service_request(self, resource: dict[str, Any]) -> dict[str, Any]:
        if self.fail_next > 0:
            self.fail_next -= 1
            raise EndpointUnreachable("mock endpoint offline")
        problems = check_service_request(resource)
        if problems:
            raise SchemaRejected("; ".join(problems))
        rid = resource["id"]
        if rid in self._assigned:
            return {"id": self._assigned[rid], "duplicate": True}
        self._counter += 1
        assigned = f"SR-{self._counter}"
        self._assigned[rid] = assigned
        self._orders.append(dict(resource))
        return {"id": assigned, "duplicate": False}

    def orders(self) -> list[dict[str, Any]]:
        return list(self._orders)


class HttpTransport:
    """POSTs resources to a remote ServiceRequest endpoint over HTTP."""

    def __init__(self, base_url: str, timeout: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def post_service_request(self, resource: dict[str, Any]) -> dict[str, Any]:
        try:
            reply = httpx.post(
                self.base_url + SERVICE_REQUEST_PATH, json=resource, timeout=self.timeout
            )
        except httpx.HTTPError as exc:
            raise EndpointUnreachable(str(exc)) from exc
        if reply.status_code in (400, 422):
            raise SchemaRejected(reply.text)
        if reply.status_code >= 500:
            raise EndpointUnreachable(f"status {reply.status_code}")
        return reply.json()


class FhirHttpServer:
    """Minimal HTTP front for a MockFhirEndpoint, for socket-level tests."""

    def __init__(self, endpoint: MockFhirEndpoint, host: str = "127.0.0.1", port: int = 0):
        self.endpoint = endpoint
        handler = self._make_handler()
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def _make_handler(self):
        endpoint = self.endpoint

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802 (http.server API)
                if self.path != SERVICE_REQUEST_PATH:
                    self._reply(404, {"error": "not found"})
                    return
                length = int(self.headers.get("Content-Length", "0"))
                try:
                    resource = json.loads(self.rfile.read(length) or b"null")
                except json.JSONDecodeError:
                    self._reply(400, {"error": "bad json"})
                    return
                try:
                    self._reply(201, endpoint.post_service_request(resource))
                except SchemaRejected as exc:
                    self._reply(422, {"error": str(exc)})
                except EndpointUnreachable as exc:
                    self._reply(503, {"error": str(exc)})

            def _reply(self, status: int, body: dict[str, Any]) -> None:
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args: Any) -> None:
                pass

        return Handler

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


class LabOrderAgent:
    """Posts lab orders, retrying an unreachable endpoint exactly once."""

    agent_id = "lab-order"

    def __init__(self, transport: Transport):
        self.transport = transport
        self._acknowledged: dict[str, str] = {}

    def execute(self, task: TaskSpec, ctx: AgentContext) -> AgentResult:
        if task.id in self._acknowledged:
            return AgentResult(
                task.id, "completed",
                {"remote_id": self._acknowledged[task.id], "deduplicated": "true"},
            )
        resource = build_service_request(task, subject_reference(ctx.document), ctx.clock.now())
        for attempt in (1, 2):
            try:
                reply = self.transport.post_service_request(resource)
            except EndpointUnreachable:
                if attempt == 2:
                    return AgentResult(task.id, "failed", {"reason": "endpoint_unreachable"})
                continue
            except SchemaRejected:
                return AgentResult(task.id, "failed", {"reason": "schema_rejected"})
            remote_id = str(reply.get("id", ""))
            if not remote_id:
                return AgentResult(task.id, "failed", {"reason": "no_id_assigned"})
            self._acknowledged[task.id] = remote_id
            return AgentResult(task.id, "completed", {"remote_id": remote_id})
        raise AssertionError("unreachable")
