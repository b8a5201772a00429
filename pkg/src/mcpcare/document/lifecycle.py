"""Version lineage: construction, hash-linked successors, redaction."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any

from mcpcare.document.changes import ChangeSet, apply_to_tree
from mcpcare.document.model import McpDocument, SCHEMA_VERSION, serialize_document
from mcpcare.document.validate import validate
from mcpcare.errors import (
    ConflictingMutation,
    InvariantBrokenByMutation,
    SchemaViolation,
    UnsupportedSchemaVersion,
)
from mcpcare.jsoncanon import ZERO_DIGEST, digest, format_timestamp

REDACTED = "[REDACTED]"


def document_hash(doc: McpDocument) -> str:
    """SHA-256 of the document's canonical bytes; the parent link target."""
    return digest(serialize_document(doc))


def new_document(doc_id: str, created_at: datetime, demographics: dict[str, str] | None = None) -> McpDocument:
    """Empty version-1 document with the all-zero parent hash."""
    tree: dict[str, Any] = {
        "header": {
            "schema_version": SCHEMA_VERSION,
            "id": doc_id,
            "version": 1,
            "created_at": format_timestamp(created_at),
            "parent_hash": ZERO_DIGEST,
        },
        "demographics": dict(demographics or {}),
        "observations": [],
        "history_notes": [],
        "objectives": [],
        "hypotheses": [],
        "task_plan": [],
        "reasoning_log": [],
        "verification": [],
    }
    return McpDocument.from_tree(tree)


def next_version_tree(doc: McpDocument) -> dict[str, Any]:
    """Deep tree copy with version bumped and parent_hash chained."""
    tree = copy.deepcopy(doc.to_tree())
    tree["header"]["version"] = doc.header.version + 1
    tree["header"]["parent_hash"] = document_hash(doc)
    return tree


def seal_tree(tree: dict[str, Any]) -> McpDocument:
    """Decode and validate an engine-built successor tree."""
    try:
        doc = McpDocument.from_tree(tree)
    except (SchemaViolation, UnsupportedSchemaVersion) as exc:
        raise InvariantBrokenByMutation(str(exc)) from exc
    violations = validate(doc)
    if violations:
        first = violations[0]
        raise InvariantBrokenByMutation(f"{first.path}: {first.rule}")
    return doc


def new_version(doc: McpDocument, changes: ChangeSet) -> McpDocument:
    """Apply a changeset and mint the hash-linked successor version.

    Header fields are derived, never user-mutable: any header path in the
    changeset is rejected before apply.
    """
    for bucket in (changes.added, changes.removed, changes.modified):
        for entry in bucket:
            if entry.path == "header" or entry.path.startswith("header/"):
                raise InvariantBrokenByMutation(f"{entry.path}: header is immutable")
    base = next_version_tree(doc)
    # Chain first, then apply: the changeset addresses body paths only.
    try:
        mutated = apply_to_tree(base, changes)
    except ConflictingMutation:
        raise
    return seal_tree(mutated)


@dataclass(frozen=True)
class RedactionPolicy:
    """Which demographic keys and note categories an external share may not carry."""

    demographic_keys: tuple[str, ...] = field(default_factory=tuple)
    note_categories: tuple[str, ...] = field(default_factory=tuple)


def redact(doc: McpDocument, policy: RedactionPolicy) -> McpDocument:
    """Successor version with policied fields replaced by a fixed marker."""
    tree = next_version_tree(doc)
    for key in policy.demographic_keys:
        if key in tree["demographics"]:
            tree["demographics"][key] = REDACTED
    for note in tree["history_notes"]:
        if note["category"] in policy.note_categories:
            note["text"] = REDACTED
    return seal_tree(tree)
