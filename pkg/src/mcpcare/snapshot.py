"""Engine state snapshots: the comparable unit for replay and continuity checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from mcpcare.jsoncanon import canonical_bytes


@dataclass(frozen=True)
class EngineStateSnapshot:
    document_id: str
    document_version: int
    task_states: tuple[tuple[str, str], ...]
    pending_verifications: tuple[str, ...]
    timeline_length: int

    @classmethod
    def build(
        cls,
        document_id: str,
        document_version: int,
        task_states: Mapping[str, str],
        timeline_length: int,
    ) -> EngineStateSnapshot:
        pending = tuple(sorted(t for t, s in task_states.items() if s == "pending_verification"))
        return cls(
            document_id=document_id,
            document_version=document_version,
            task_states=tuple(sorted(task_states.items())),
            pending_verifications=pending,
            timeline_length=timeline_length,
        )

    def states(self) -> dict[str, str]:
        return dict(self.task_states)

    def to_tree(self) -> dict[str, Any]:
        return {
            "document_id": self.document_id,
            "document_version": self.document_version,
            "task_states": dict(self.task_states),
            "pending_verifications": list(self.pending_verifications),
            "timeline_length": self.timeline_length,
        }

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_tree())

    def continuity_view(self) -> dict[str, Any]:
        """Snapshot minus timeline length: what must survive a handoff intact.

        The receiving ledger restarts its chain, so event counts differ across
        a handoff while document state must not.
        """
        tree = self.to_tree()
        del tree["timeline_length"]
        return tree
