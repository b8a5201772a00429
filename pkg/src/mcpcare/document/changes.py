"""Structural diff and conflict-checked apply between document versions.

Paths are slash-joined. The three id-bearing lists (objectives, hypotheses,
task_plan) are keyed by entry id, so `task_plan/t1/state` survives reordering;
an `<list>/@order` entry records pure reorders. Append-only record lists
(observations, history_notes, reasoning_log, verification) are index-keyed.
Inner scalar lists (depends_on, evidence_refs) compare atomically.

Diffing lists with duplicate ids is undefined; validate() rejects them first.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

from mcpcare.document.model import McpDocument
from mcpcare.errors import ConflictingMutation, UnaddressableField

ID_KEYED_LISTS = ("objectives", "hypotheses", "task_plan")
ORDER_KEY = "@order"


@dataclass(frozen=True)
class ChangeEntry:
    path: str
    before: Any
    after: Any

    def to_tree(self) -> dict[str, Any]:
        return {"path": self.path, "before": self.before, "after": self.after}


@dataclass
class ChangeSet:
    added: list[ChangeEntry] = field(default_factory=list)
    removed: list[ChangeEntry] = field(default_factory=list)
    modified: list[ChangeEntry] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.modified)

    def to_tree(self) -> dict[str, Any]:
        return {
            "added": [e.to_tree() for e in self.added],
            "removed": [e.to_tree() for e in self.removed],
            "modified": [e.to_tree() for e in self.modified],
        }

    @classmethod
    def from_tree(cls, tree: Any) -> ChangeSet:
        if not isinstance(tree, dict):
            raise UnaddressableField("changeset must be an object")
        out = cls()
        for bucket in ("added", "removed", "modified"):
            entries = tree.get(bucket, [])
            if not isinstance(entries, list):
                raise UnaddressableField(f"changeset {bucket} must be an array")
            for entry in entries:
                if not isinstance(entry, dict) or not isinstance(entry.get("path"), str):
                    raise UnaddressableField(f"bad entry in {bucket}")
                getattr(out, bucket).append(
                    ChangeEntry(entry["path"], entry.get("before"), entry.get("after"))
                )
        return out


def diff(a: McpDocument, b: McpDocument) -> ChangeSet:
    """Changeset such that apply_changeset(a, diff(a, b)) reproduces b."""
    cs = ChangeSet()
    _walk(a.to_tree(), b.to_tree(), "", cs)
    return cs


def _join(path: str, segment: str) -> str:
    return f"{path}/{segment}" if path else segment


def _walk(a: Any, b: Any, path: str, cs: ChangeSet) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        for key in a:
            if key not in b:
                cs.removed.append(ChangeEntry(_join(path, key), a[key], None))
            else:
                _walk(a[key], b[key], _join(path, key), cs)
        for key in b:
            if key not in a:
                cs.added.append(ChangeEntry(_join(path, key), None, b[key]))
        return
    if isinstance(a, list) and isinstance(b, list):
        if path in ID_KEYED_LISTS:
            _walk_id_keyed(a, b, path, cs)
        elif all(isinstance(x, dict) for x in a) and all(isinstance(x, dict) for x in b):
            _walk_records(a, b, path, cs)
        elif a != b:
            cs.modified.append(ChangeEntry(path, a, b))
        return
    if a != b:
        cs.modified.append(ChangeEntry(path, a, b))


def _walk_id_keyed(a: list[Any], b: list[Any], path: str, cs: ChangeSet) -> None:
    a_ids = [e["id"] for e in a]
    b_ids = [e["id"] for e in b]
    a_map = {e["id"]: e for e in a}
    b_map = {e["id"]: e for e in b}
    for eid in a_ids:
        if eid not in b_map:
            cs.removed.append(ChangeEntry(_join(path, eid), a_map[eid], None))
    for eid in b_ids:
        if eid not in a_map:
            cs.added.append(ChangeEntry(_join(path, eid), None, b_map[eid]))
        else:
            _walk(a_map[eid], b_map[eid], _join(path, eid), cs)
    expected = [i for i in a_ids if i in b_map] + [i for i in b_ids if i not in a_map]
    if expected != b_ids:
        cs.modified.append(ChangeEntry(_join(path, ORDER_KEY), a_ids, b_ids))


def _walk_records(a: list[Any], b: list[Any], path: str, cs: ChangeSet) -> None:
    for i in range(min(len(a), len(b))):
        _walk(a[i], b[i], _join(path, str(i)), cs)
    for i in range(len(b), len(a)):
        cs.removed.append(ChangeEntry(_join(path, str(i)), a[i], None))
    for i in range(len(a), len(b)):
        cs.added.append(ChangeEntry(_join(path, str(i)), None, b[i]))


# -- apply --------------------------------------------------------------------


def apply_changeset(doc: McpDocument, cs: ChangeSet) -> McpDocument:
    """Apply a changeset, verifying every `before` value against the document."""
    tree = apply_to_tree(doc.to_tree(), cs)
    return McpDocument.from_tree(tree)


def apply_to_tree(tree: dict[str, Any], cs: ChangeSet) -> dict[str, Any]:
    tree = copy.deepcopy(tree)

    order_entries = [e for e in cs.modified if e.path.split("/")[-1] == ORDER_KEY]
    plain_modified = [e for e in cs.modified if e.path.split("/")[-1] != ORDER_KEY]

    # Order checks bind to the pre-mutation document.
    for entry in order_entries:
        parent, _ = _split(entry.path)
        target = _resolve(tree, parent)
        if not isinstance(target, list):
            raise UnaddressableField(entry.path)
        if [e.get("id") for e in target] != entry.before:
            raise ConflictingMutation(entry.path, "order mismatch")

    for entry in plain_modified:
        parent, leaf = _split(entry.path)
        container = _resolve(tree, parent)
        key = _container_key(container, leaf, entry.path)
        current = _get(container, key, entry.path)
        if current != entry.before:
            raise ConflictingMutation(entry.path, "before value mismatch")
        _set(container, key, copy.deepcopy(entry.after))

    _apply_removed(tree, cs.removed)
    _apply_added(tree, cs.added)

    for entry in order_entries:
        parent, _ = _split(entry.path)
        target = _resolve(tree, parent)
        current_ids = [e.get("id") for e in target]
        if sorted(map(str, current_ids)) != sorted(map(str, entry.after)):
            raise ConflictingMutation(entry.path, "order is not a permutation")
        by_id = {e.get("id"): e for e in target}
        target[:] = [by_id[i] for i in entry.after]

    return tree


def _apply_removed(tree: dict[str, Any], removed: list[ChangeEntry]) -> None:
    indexed: dict[int, tuple[list[Any], list[tuple[int, ChangeEntry]]]] = {}
    for entry in removed:
        parent, leaf = _split(entry.path)
        container = _resolve(tree, parent)
        if isinstance(container, dict):
            if leaf not in container:
                raise ConflictingMutation(entry.path, "missing key")
            if container[leaf] != entry.before:
                raise ConflictingMutation(entry.path, "before value mismatch")
            del container[leaf]
        elif isinstance(container, list):
            if _is_id_keyed(parent):
                idx = _index_of_id(container, leaf)
                if idx is None:
                    raise ConflictingMutation(entry.path, "missing id")
                if container[idx] != entry.before:
                    raise ConflictingMutation(entry.path, "before value mismatch")
                container.pop(idx)
            else:
                # Defer index removals so earlier pops cannot shift later ones.
                bucket = indexed.setdefault(id(container), (container, []))
                bucket[1].append((_as_index(leaf, entry.path), entry))
        else:
            raise UnaddressableField(entry.path)
    for container, pairs in indexed.values():
        for idx, entry in sorted(pairs, key=lambda p: p[0], reverse=True):
            if idx >= len(container) or container[idx] != entry.before:
                raise ConflictingMutation(entry.path, "before value mismatch")
            container.pop(idx)


def _apply_added(tree: dict[str, Any], added: list[ChangeEntry]) -> None:
    indexed: list[tuple[list[Any], int, ChangeEntry]] = []
    for entry in added:
        parent, leaf = _split(entry.path)
        container = _resolve(tree, parent)
        if isinstance(container, dict):
            if leaf in container:
                raise ConflictingMutation(entry.path, "key already present")
            container[leaf] = copy.deepcopy(entry.after)
        elif isinstance(container, list):
            if _is_id_keyed(parent):
                if _index_of_id(container, leaf) is not None:
                    raise ConflictingMutation(entry.path, "id already present")
                value = copy.deepcopy(entry.after)
                if not isinstance(value, dict) or value.get("id") != leaf:
                    raise ConflictingMutation(entry.path, "entry id does not match path")
                container.append(value)
            else:
                indexed.append((container, _as_index(leaf, entry.path), entry))
        else:
            raise UnaddressableField(entry.path)
    for container, idx, entry in sorted(indexed, key=lambda p: p[1]):
        if idx != len(container):
            raise ConflictingMutation(entry.path, "index is not the append point")
        container.append(copy.deepcopy(entry.after))


# -- path navigation ----------------------------------------------------------


def _split(path: str) -> tuple[str, str]:
    if "/" not in path:
        return "", path
    parent, _, leaf = path.rpartition("/")
    return parent, leaf


def _is_id_keyed(path: str) -> bool:
    return path in ID_KEYED_LISTS


def _as_index(segment: str, path: str) -> int:
    if not segment.isdigit():
        raise UnaddressableField(path)
    return int(segment)


def _index_of_id(container: list[Any], eid: str) -> int | None:
    for i, element in enumerate(container):
        if isinstance(element, dict) and element.get("id") == eid:
            return i
    return None


def _resolve(tree: Any, path: str) -> Any:
    if path == "":
        return tree
    node = tree
    walked = ""
    for segment in path.split("/"):
        if isinstance(node, dict):
            if segment not in node:
                raise UnaddressableField(path)
            node = node[segment]
        elif isinstance(node, list):
            if _is_id_keyed(walked):
                idx = _index_of_id(node, segment)
                if idx is None:
                    raise UnaddressableField(path)
                node = node[idx]
            else:
                idx = _as_index(segment, path)
                if idx >= len(node):
                    raise UnaddressableField(path)
                node = node[idx]
        else:
            raise UnaddressableField(path)
        walked = _join(walked, segment)
    return node


def _container_key(container: Any, leaf: str, path: str) -> Any:
    if isinstance(container, dict):
        return leaf
    if isinstance(container, list):
        parent, _ = _split(path)
        if _is_id_keyed(parent):
            idx = _index_of_id(container, leaf)
            if idx is None:
                raise ConflictingMutation(path, "missing id")
            return idx
        idx = _as_index(leaf, path)
        if idx >= len(container):
            raise ConflictingMutation(path, "missing index")
        return idx
    raise UnaddressableField(path)


def _get(container: Any, key: Any, path: str) -> Any:
    try:
        return container[key]
    except (KeyError, IndexError):
        raise ConflictingMutation(path, "missing value") from None


def _set(container: Any, key: Any, value: Any) -> None:
    container[key] = value
