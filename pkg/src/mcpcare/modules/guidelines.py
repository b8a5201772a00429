"""Descriptive guideline rules: predicate trees rendered into verdicts.

A rule never mutates anything. It matches a proposal target (task or
hypothesis) against the document and yields pass or a flag; contraindication
and red_flag block, conflict and missing_data annotate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from mcpcare.document.model import Hypothesis, McpDocument, TaskSpec
from mcpcare.errors import FixtureInvalid, UnaddressableField
from mcpcare.modules import ModuleDescriptor

RULES_FORMAT = "mcp-rules/1"

FLAGS = ("conflict", "red_flag", "missing_data", "contraindication")
BLOCKING_FLAGS = frozenset({"contraindication", "red_flag"})
COMPARISON_OPS = ("eq", "ne", "lt", "le", "gt", "ge")
PRESENCE_OPS = ("present", "absent")
APPLIES_TO = ("task", "hypothesis")

_MISSING = object()


@dataclass(frozen=True)
class GuidelineRule:
    rule_id: str
    description: str
    applies_to: str
    when: dict[str, Any]
    flag: str
    citation: str


@dataclass(frozen=True)
class RuleOutcome:
    rule_id: str
    result: str  # "pass" or one of FLAGS


@dataclass(frozen=True)
class Verdict:
    target_kind: str
    target_id: str
    outcomes: tuple[RuleOutcome, ...]
    overall: str  # "validated" | "blocked"
    notes: str

    def flags(self) -> tuple[str, ...]:
        return tuple(o.result for o in self.outcomes if o.result != "pass")

    def to_tree(self) -> dict[str, Any]:
        return {
            "target_kind": self.target_kind,
            "target_id": self.target_id,
            "outcomes": [{"rule_id": o.rule_id, "result": o.result} for o in self.outcomes],
            "overall": self.overall,
            "notes": self.notes,
        }


def load_rules(tree: Any) -> list[GuidelineRule]:
    """Decode and sanity-check a rule-set tree; bad selectors fail loading."""
    if not isinstance(tree, dict) or tree.get("format") != RULES_FORMAT:
        raise FixtureInvalid(f"rule set must declare format {RULES_FORMAT}")
    raw_rules = tree.get("rules")
    if not isinstance(raw_rules, list) or not raw_rules:
        raise FixtureInvalid("rule set has no rules array")
    rules: list[GuidelineRule] = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_rules):
        if not isinstance(raw, dict):
            raise FixtureInvalid(f"rules[{i}] is not an object")
        try:
            rule = GuidelineRule(
                rule_id=str(raw["rule_id"]),
                description=str(raw.get("description", "")),
                applies_to=str(raw["applies_to"]),
                when=raw["when"],
                flag=str(raw["flag"]),
                citation=str(raw.get("citation", "")),
            )
        except KeyError as exc:
            raise FixtureInvalid(f"rules[{i}] missing {exc}") from None
        if rule.applies_to not in APPLIES_TO:
            raise FixtureInvalid(f"{rule.rule_id}: applies_to {rule.applies_to!r}")
        if rule.flag not in FLAGS:
            raise FixtureInvalid(f"{rule.rule_id}: flag {rule.flag!r}")
        if rule.rule_id in seen:
            raise FixtureInvalid(f"duplicate rule_id {rule.rule_id!r}")
        seen.add(rule.rule_id)
        _check_predicate(rule.when, rule.rule_id)
        rules.append(rule)
    return rules


def _check_predicate(node: Any, rule_id: str) -> None:
    if not isinstance(node, dict):
        raise FixtureInvalid(f"{rule_id}: predicate node must be an object")
    if "all" in node or "any" in node:
        key = "all" if "all" in node else "any"
        children = node[key]
        if not isinstance(children, list) or not children:
            raise FixtureInvalid(f"{rule_id}: {key} needs a non-empty array")
        for child in children:
            _check_predicate(child, rule_id)
        return
    if "not" in node:
        _check_predicate(node["not"], rule_id)
        return
    selector = node.get("field")
    op = node.get("op")
    if not isinstance(selector, str) or not isinstance(op, str):
        raise FixtureInvalid(f"{rule_id}: leaf needs field and op")
    _check_selector(selector)
    if op in COMPARISON_OPS:
        if "value" not in node:
            raise FixtureInvalid(f"{rule_id}: op {op} needs a value")
    elif op not in PRESENCE_OPS:
        raise FixtureInvalid(f"{rule_id}: unknown op {op!r}")


_TARGET_FIELDS = ("id", "kind", "confidence", "requires_approval", "condition_code", "evidence_count")


def _check_selector(selector: str) -> None:
    head, _, rest = selector.partition(".")
    if head == "target":
        if rest in _TARGET_FIELDS:
            return
        if rest.startswith("payload.") and len(rest) > len("payload."):
            return
    elif head in ("observation", "demographic") and rest:
        return
    raise UnaddressableField(selector)


# -- evaluation ---------------------------------------------------------------


def _select(selector: str, doc: McpDocument, target: TaskSpec | Hypothesis) -> Any:
    head, _, rest = selector.partition(".")
    if head == "target":
        if rest.startswith("payload."):
            if isinstance(target, TaskSpec):
                return target.payload.get(rest[len("payload."):], _MISSING)
            return _MISSING
        if rest == "kind":
            return target.kind.value if isinstance(target, TaskSpec) else _MISSING
        if rest == "condition_code":
            return target.condition_code if isinstance(target, Hypothesis) else _MISSING
        if rest == "evidence_count":
            return len(target.evidence_refs) if isinstance(target, Hypothesis) else _MISSING
        if rest == "requires_approval":
            return target.requires_approval if isinstance(target, TaskSpec) else _MISSING
        if rest in ("id", "confidence"):
            return getattr(target, rest)
        return _MISSING
    if head == "observation":
        latest = doc.latest_observation(rest)
        return _MISSING if latest is None else latest.value
    if head == "demographic":
        return doc.demographics.get(rest, _MISSING)
    raise UnaddressableField(selector)


def _compare(op: str, left: Any, right: Any) -> bool:
    if op == "present":
        return left is not _MISSING
    if op == "absent":
        return left is _MISSING
    if left is _MISSING:
        return op == "ne"
    lnum, rnum = _as_number(left), _as_number(right)
    if lnum is not None and rnum is not None:
        left, right = lnum, rnum
    elif op in ("lt", "le", "gt", "ge"):
        return False
    if op == "eq":
        return left == right
    if op == "ne":
        return left != right
    if op == "lt":
        return left < right
    if op == "le":
        return left <= right
    if op == "gt":
        return left > right
    return left >= right


def _as_number(value: Any) -> float | None:
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def evaluate_predicate(node: dict[str, Any], doc: McpDocument, target: TaskSpec | Hypothesis) -> bool:
    if "all" in node:
        return all(evaluate_predicate(c, doc, target) for c in node["all"])
    if "any" in node:
        return any(evaluate_predicate(c, doc, target) for c in node["any"])
    if "not" in node:
        return not evaluate_predicate(node["not"], doc, target)
    value = _select(node["field"], doc, target)
    return _compare(node["op"], value, node.get("value"))


def evaluate_target(doc: McpDocument, target: TaskSpec | Hypothesis, rules: list[GuidelineRule]) -> Verdict:
    """Run every applicable rule (sorted by rule_id) against one target."""
    target_kind = "task" if isinstance(target, TaskSpec) else "hypothesis"
    outcomes: list[RuleOutcome] = []
    for rule in sorted(rules, key=lambda r: r.rule_id):
        if rule.applies_to != target_kind:
            continue
        fired = evaluate_predicate(rule.when, doc, target)
        outcomes.append(RuleOutcome(rule.rule_id, rule.flag if fired else "pass"))
    flagged = [o for o in outcomes if o.result != "pass"]
    overall = "blocked" if any(o.result in BLOCKING_FLAGS for o in flagged) else "validated"
    notes = "; ".join(f"{o.rule_id}:{o.result}" for o in flagged) or "all rules passed"
    return Verdict(
        target_kind=target_kind,
        target_id=target.id,
        outcomes=tuple(outcomes),
        overall=overall,
        notes=notes,
    )


class GuidelineRuleEngine:
    """Descriptive module wrapping a fixed rule set."""

    def __init__(self, rules: list[GuidelineRule], module_id: str = "guideline-rules/1"):
        self.descriptor = ModuleDescriptor(module_id=module_id, kind="descriptive", version="1")
        self.rules = list(rules)

    def validate_targets(self, doc: McpDocument, targets: list[TaskSpec | Hypothesis]) -> list[Verdict]:
        return [evaluate_target(doc, t, self.rules) for t in targets]
