"""Gate policy: which tasks may pass verification without a physician."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from mcpcare.document.model import TaskKind, TaskSpec
from mcpcare.errors import FixtureInvalid

DEFAULT_HARD_GATE_KINDS = frozenset(
    {TaskKind.LAB_ORDER, TaskKind.REFERRAL, TaskKind.MEDICATION_CHANGE, TaskKind.HANDOFF}
)


@dataclass(frozen=True)
class GatePolicy:
    auto_advance_threshold: float = 0.8
    hard_gate_kinds: frozenset[TaskKind] = field(default_factory=lambda: DEFAULT_HARD_GATE_KINDS)

    def __post_init__(self) -> None:
        if not 0.0 <= self.auto_advance_threshold <= 1.0:
            raise ValueError(f"auto_advance_threshold out of range: {self.auto_advance_threshold}")
        missing = DEFAULT_HARD_GATE_KINDS - self.hard_gate_kinds
        if missing:
            names = ", ".join(sorted(k.value for k in missing))
            raise ValueError(f"hard_gate_kinds may not drop defaults: {names}")

    def auto_advances(self, task: TaskSpec) -> bool:
        """True when the gate may approve the task without a physician."""
        if task.requires_approval or task.kind in self.hard_gate_kinds:
            return False
        return task.confidence >= self.auto_advance_threshold


def load_policy(text: str) -> GatePolicy:
    """Parse `key = value` config lines (JSON-typed values, # comments)."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value_text = line.partition("=")
        if not sep:
            raise FixtureInvalid(f"line {lineno}: expected key = value")
        key = key.strip()
        try:
            values[key] = json.loads(value_text.strip())
        except json.JSONDecodeError:
            raise FixtureInvalid(f"line {lineno}: unparseable value for {key!r}") from None

    known = {"auto_advance_threshold", "hard_gate_kinds"}
    unknown = set(values) - known
    if unknown:
        raise FixtureInvalid(f"unknown config keys: {', '.join(sorted(unknown))}")

    kwargs: dict[str, object] = {}
    if "auto_advance_threshold" in values:
        threshold = values["auto_advance_threshold"]
        if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
            raise FixtureInvalid("auto_advance_threshold must be a number")
        kwargs["auto_advance_threshold"] = float(threshold)
    if "hard_gate_kinds" in values:
        kinds = values["hard_gate_kinds"]
        if not isinstance(kinds, list) or not all(isinstance(k, str) for k in kinds):
            raise FixtureInvalid("hard_gate_kinds must be a list of strings")
        try:
            kwargs["hard_gate_kinds"] = frozenset(TaskKind(k) for k in kinds)
        except ValueError as exc:
            raise FixtureInvalid(f"hard_gate_kinds: {exc}") from None
    try:
        return GatePolicy(**kwargs)  # type: ignore[arg-type]
    except ValueError as exc:
        raise FixtureInvalid(str(exc)) from None
