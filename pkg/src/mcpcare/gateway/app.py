"""HTTP gateway over the document store, engine, and handoff exchange.

All request bodies are plain JSON trees; the domain parsers do the strict
validation, so the wire layer stays a thin translation between exceptions
and status codes. Writes take an optional ``X-Expected-Version`` header and
fail with 409 when the head has moved.
"""
from __future__ import annotations

from contextlib import contextmanager
from typing import Any, Iterator

from fastapi import Body, Depends, FastAPI, Header, HTTPException

from mcpcare.agents.handoff import HandoffPackage, accept_handoff, prepare_handoff
from mcpcare.document.lifecycle import document_hash, next_version_tree, seal_tree
from mcpcare.document.model import DecisionKind, McpDocument
from mcpcare.errors import (
    ChainBreak,
    ConflictingMutation,
    DuplicateDocument,
    FixtureInvalid,
    InvalidModification,
    InvalidPayload,
    InvariantBrokenByMutation,
    LedgerClosed,
    MalformedDocument,
    McpError,
    NonReplayableEvent,
    PendingVerificationBlock,
    ProofMismatch,
    SchemaViolation,
    StorageFailure,
    TaskNotPending,
    UnaddressableField,
    UnknownDocument,
    UnsupportedSchemaVersion,
    VersionConflict,
)
from mcpcare.gateway.auth import Session
from mcpcare.gateway.runtime import Runtime, ingest_document
from mcpcare.gateway.views import pending_queue
from mcpcare.ledger import ENGINE, Ledger, LedgerProof, verify_chain
from mcpcare.replay import encode_task_map

_UNPROCESSABLE = (
    SchemaViolation,
    MalformedDocument,
    UnsupportedSchemaVersion,
    InvariantBrokenByMutation,
    ConflictingMutation,
    UnaddressableField,
    InvalidModification,
    InvalidPayload,
    TaskNotPending,
    PendingVerificationBlock,
    ProofMismatch,
    NonReplayableEvent,
    FixtureInvalid,
)


@contextmanager
def _translated() -> Iterator[None]:
    """Map domain failures onto HTTP status codes."""
    try:
        yield
    except UnknownDocument as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except VersionConflict as exc:
        raise HTTPException(
            status_code=409,
            detail={"error": "version_conflict", "expected": exc.expected, "actual": exc.actual},
        ) from exc
    except (DuplicateDocument, LedgerClosed) as exc:
        raise HTTPException(
            status_code=409, detail={"error": type(exc).__name__, "message": str(exc)}
        ) from exc
    except _UNPROCESSABLE as exc:
        raise HTTPException(
            status_code=422, detail={"error": type(exc).__name__, "message": str(exc)}
        ) from exc
    except (ChainBreak, StorageFailure, McpError) as exc:
        raise HTTPException(
            status_code=500, detail={"error": type(exc).__name__, "message": str(exc)}
        ) from exc


def _expected_version(raw: str | None) -> int | None:
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise HTTPException(status_code=422, detail=f"X-Expected-Version is not an integer: {raw!r}")


def create_app(runtime: Runtime) -> FastAPI:
    app = FastAPI(title="mcpcare gateway", version="1")
    store = runtime.store

    def current_session(authorization: str | None = Header(default=None)) -> Session:
        session = runtime.auth.session_for(authorization)
        if session is None:
            raise HTTPException(status_code=401, detail="missing or unknown bearer token")
        return session

    def require(session: Session, *roles: str) -> None:
        if session.role not in roles:
            raise HTTPException(
                status_code=403, detail=f"role {session.role!r} may not perform this action"
            )

    def head_and_ledger(document_id: str) -> tuple[McpDocument, Ledger]:
        with _translated():
            return store.head(document_id), store.ledger(document_id)

    # -- documents -----------------------------------------------------------

    @app.get("/documents")
    def list_documents(session: Session = Depends(current_session)) -> dict[str, Any]:
        return {"documents": store.ids()}

    @app.post("/documents", status_code=201)
    def create_document(
        tree: dict[str, Any] = Body(...),
        session: Session = Depends(current_session),
    ) -> dict[str, Any]:
        require(session, "physician", "engineer")
        with _translated():
            doc = McpDocument.from_tree(tree)
            ledger = ingest_document(store, doc, runtime.clock)
        return {
            "document_id": doc.header.id,
            "version": doc.header.version,
            "head_hash": ledger.head_hash(),
        }

    @app.get("/documents/{document_id}")
    def get_document(
        document_id: str, session: Session = Depends(current_session)
    ) -> dict[str, Any]:
        doc, _ = head_and_ledger(document_id)
        return doc.to_tree()

    @app.post("/documents/{document_id}/observations")
    def add_observations(
        document_id: str,
        body: dict[str, Any] = Body(...),
        x_expected_version: str | None = Header(default=None),
        session: Session = Depends(current_session),
    ) -> dict[str, Any]:
        require(session, "physician", "engineer")
        observations = body.get("observations")
        if not isinstance(observations, list) or not observations:
            raise HTTPException(status_code=422, detail="body needs a non-empty observations array")

        def apply(head: McpDocument, ledger: Ledger) -> McpDocument:
            tree = next_version_tree(head)
            tree["observations"].extend(observations)
            new_head = seal_tree(tree)
            states = {t.id: t.state.value for t in new_head.task_plan}
            ledger.append(
                timestamp=runtime.clock.now(),
                document_version=new_head.header.version,
                actor=ENGINE,
                event_kind="ingested",
                payload_digest=document_hash(new_head),
                detail=f"tasks={encode_task_map(states)}",
            )
            return new_head

        with _translated():
            head = store.mutate(document_id, _expected_version(x_expected_version), apply)
        return {"document_id": document_id, "version": head.header.version}

    # -- engine --------------------------------------------------------------

    @app.post("/documents/{document_id}/advance")
    def advance(
        document_id: str,
        x_expected_version: str | None = Header(default=None),
        session: Session = Depends(current_session),
    ) -> dict[str, Any]:
        require(session, "physician", "engineer")

        def run(head: McpDocument, ledger: Ledger) -> McpDocument:
            return runtime.orchestrator.reason_and_run(head, ledger)[0]

        with _translated():
            head = store.mutate(document_id, _expected_version(x_expected_version), run)
            snapshot = runtime.engine.snapshot(head, store.ledger(document_id))
        return {
            "document_id": document_id,
            "version": head.header.version,
            "snapshot": snapshot.to_tree(),
        }

    @app.get("/documents/{document_id}/pending")
    def pending(
        document_id: str, session: Session = Depends(current_session)
    ) -> dict[str, Any]:
        doc, _ = head_and_ledger(document_id)
        return {
            "document_id": document_id,
            "version": doc.header.version,
            "items": [item.to_tree() for item in pending_queue(doc)],
        }

    def _decision_args(body: dict[str, Any]) -> dict[str, Any]:
        task_id = body.get("task_id")
        decision = body.get("decision")
        if not isinstance(task_id, str) or not task_id:
            raise HTTPException(status_code=422, detail="body needs a task_id string")
        if decision not in tuple(d.value for d in DecisionKind):
            raise HTTPException(status_code=422, detail=f"unknown decision {decision!r}")
        note = body.get("note", "")
        if not isinstance(note, str):
            raise HTTPException(status_code=422, detail="note must be a string")
        modification = body.get("modification")
        if modification is not None and not isinstance(modification, dict):
            raise HTTPException(status_code=422, detail="modification must be an object")
        return {
            "task_id": task_id,
            "decision": decision,
            "note": note,
            "modification": modification,
        }

    @app.post("/documents/{document_id}/decisions")
    def decide(
        document_id: str,
        body: dict[str, Any] = Body(...),
        x_expected_version: str | None = Header(default=None),
        session: Session = Depends(current_session),
    ) -> dict[str, Any]:
        require(session, "physician")
        args = _decision_args(body)

        def apply(head: McpDocument, ledger: Ledger) -> McpDocument:
            return runtime.engine.apply_decision(
                head, ledger, actor_id=session.actor_id, **args
            )

        with _translated():
            head = store.mutate(document_id, _expected_version(x_expected_version), apply)
        return {
            "document_id": document_id,
            "version": head.header.version,
            "task_id": args["task_id"],
            "decision": args["decision"],
        }

    @app.post("/documents/{document_id}/simulate")
    def simulate(
        document_id: str,
        body: dict[str, Any] = Body(...),
        session: Session = Depends(current_session),
    ) -> dict[str, Any]:
        args = _decision_args(body)
        doc, ledger = head_and_ledger(document_id)
        with _translated():
            snapshot, delta = runtime.engine.simulate_decision(
                doc, ledger, actor_id=session.actor_id, **args
            )
        return {
            "document_id": document_id,
            "snapshot": snapshot.to_tree(),
            "delta": delta,
        }

    # -- audit and handoff -----------------------------------------------------

    @app.get("/documents/{document_id}/audit")
    def audit(
        document_id: str, session: Session = Depends(current_session)
    ) -> dict[str, Any]:
        _, ledger = head_and_ledger(document_id)
        events = ledger.events()
        proof = verify_chain(events)
        if isinstance(proof, LedgerProof):
            verification = {"ok": True, "head_hash": proof.head_hash, "length": proof.length}
        else:
            verification = {"ok": False, "break_seq": proof.seq}
        return {
            "document_id": document_id,
            "closed": ledger.closed,
            "events": [e.to_tree() for e in events],
            "verification": verification,
        }

    @app.post("/documents/{document_id}/handoff")
    def handoff(
        document_id: str,
        body: dict[str, Any] = Body(...),
        x_expected_version: str | None = Header(default=None),
        session: Session = Depends(current_session),
    ) -> dict[str, Any]:
        require(session, "physician", "engineer")
        from_provider = body.get("from_provider")
        to_provider = body.get("to_provider")
        if not isinstance(from_provider, str) or not isinstance(to_provider, str):
            raise HTTPException(status_code=422, detail="body needs from_provider and to_provider")
        package: list[HandoffPackage] = []

        def seal(head: McpDocument, ledger: Ledger) -> McpDocument:
            package.append(
                prepare_handoff(
                    head,
                    ledger,
                    from_provider=from_provider,
                    to_provider=to_provider,
                    clock=runtime.clock,
                    allow_pending=bool(body.get("allow_pending", False)),
                )
            )
            return head

        with _translated():
            store.mutate(document_id, _expected_version(x_expected_version), seal)
        return package[0].to_tree()

    @app.post("/handoffs/accept", status_code=201)
    def accept(
        tree: dict[str, Any] = Body(...),
        session: Session = Depends(current_session),
    ) -> dict[str, Any]:
        require(session, "physician", "engineer")
        with _translated():
            package = HandoffPackage.from_tree(tree)
            doc, ledger = accept_handoff(
                package, existing_ids=store.ids(), clock=runtime.clock
            )
            store.install(doc, ledger)
        return {
            "document_id": doc.header.id,
            "version": doc.header.version,
            "head_hash": ledger.head_hash(),
        }

    return app
