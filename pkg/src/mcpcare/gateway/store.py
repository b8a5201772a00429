"""Document store: per-document serialization plus optimistic version checks.

In-memory by default; given a root directory it persists every committed
head as canonical bytes and every ledger as an append-only line file, laid
out as ``documents/<id>/<version>.mcp.json`` and ``ledgers/<id>.ledger.jsonl``.
"""
from __future__ import annotations

import threading
from pathlib import Path
from typing import Callable

from mcpcare.document.model import FILE_EXTENSION, McpDocument, parse_document, serialize_document
from mcpcare.document.validate import validate
from mcpcare.errors import (
    DuplicateDocument,
    SchemaViolation,
    StorageFailure,
    UnknownDocument,
    VersionConflict,
)
from mcpcare.ledger import LEDGER_SUFFIX, Ledger


class DocumentStore:
    def __init__(self, root: Path | None = None):
        self.root = root
        self._heads: dict[str, McpDocument] = {}
        self._ledgers: dict[str, Ledger] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()
        if root is not None:
            self._load_existing(root)

    # -- lookup ------------------------------------------------------------

    def ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._heads)

    def exists(self, document_id: str) -> bool:
        with self._registry_lock:
            return document_id in self._heads

    def head(self, document_id: str) -> McpDocument:
        with self._registry_lock:
            if document_id not in self._heads:
                raise UnknownDocument(document_id)
            return self._heads[document_id]

    def ledger(self, document_id: str) -> Ledger:
        with self._registry_lock:
            if document_id not in self._ledgers:
                raise UnknownDocument(document_id)
            return self._ledgers[document_id]

    # -- mutation ------------------------------------------------------------

    def create(self, doc: McpDocument) -> Ledger:
        """Register a new document and its empty ledger."""
        violations = validate(doc)
        if violations:
            first = violations[0]
            raise SchemaViolation(first.path, first.rule, first.message)
        document_id = doc.header.id
        with self._registry_lock:
            if document_id in self._heads:
                raise DuplicateDocument(document_id)
            ledger = Ledger(document_id, path=self._ledger_path(document_id))
            self._heads[document_id] = doc
            self._ledgers[document_id] = ledger
            self._locks[document_id] = threading.RLock()
        self._persist(doc)
        return ledger

    def install(self, doc: McpDocument, ledger: Ledger) -> None:
        """Adopt a document arriving with its own ledger (handoff receipt)."""
        document_id = doc.header.id
        with self._registry_lock:
            if document_id in self._heads:
                raise DuplicateDocument(document_id)
            if self.root is not None and ledger.path is None:
                target = self._ledger_path(document_id)
                if target is not None:
                    ledger = ledger.persisted_copy(target)
            self._heads[document_id] = doc
            self._ledgers[document_id] = ledger
            self._locks[document_id] = threading.RLock()
        self._persist(doc)

    def mutate(
        self,
        document_id: str,
        expected_version: int | None,
        fn: Callable[[McpDocument, Ledger], McpDocument],
    ) -> McpDocument:
        """Run fn under the document's writer lock; one writer wins per version."""
        with self._registry_lock:
            if document_id not in self._heads:
                raise UnknownDocument(document_id)
            lock = self._locks[document_id]
        with lock:
            head = self._heads[document_id]
            if expected_version is not None and head.header.version != expected_version:
                raise VersionConflict(expected_version, head.header.version)
            new_head = fn(head, self._ledgers[document_id])
            if new_head is not head:
                self._heads[document_id] = new_head
                self._persist(new_head)
            return new_head

    # -- persistence -----------------------------------------------------------

    def _ledger_path(self, document_id: str) -> Path | None:
        if self.root is None:
            return None
        ledger_dir = self.root / "ledgers"
        ledger_dir.mkdir(parents=True, exist_ok=True)
        return ledger_dir / f"{document_id}{LEDGER_SUFFIX}"

    def _persist(self, doc: McpDocument) -> None:
        if self.root is None:
            return
        doc_dir = self.root / "documents" / doc.header.id
        try:
            doc_dir.mkdir(parents=True, exist_ok=True)
            target = doc_dir / f"{doc.header.version:06d}{FILE_EXTENSION}"
            tmp = target.with_suffix(".tmp")
            tmp.write_bytes(serialize_document(doc))
            tmp.replace(target)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def _load_existing(self, root: Path) -> None:
        documents_dir = root / "documents"
        if not documents_dir.is_dir():
            return
        for doc_dir in sorted(documents_dir.iterdir()):
            if not doc_dir.is_dir():
                continue
            versions = sorted(doc_dir.glob(f"*{FILE_EXTENSION}"))
            if not versions:
                continue
            head = parse_document(versions[-1].read_bytes())
            document_id = head.header.id
            ledger_path = self._ledger_path(document_id)
            if ledger_path is not None and ledger_path.exists():
                ledger = Ledger.load(ledger_path)
            else:
                ledger = Ledger(document_id, path=ledger_path)
            self._heads[document_id] = head
            self._ledgers[document_id] = ledger
            self._locks[document_id] = threading.RLock()
