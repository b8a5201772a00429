"""Generative template engine: deterministic proposal synthesis.

A template matches a document on observation codes and demographics, then
emits a proposal: an optional hypothesis, immediately actionable tasks, and
follow-up hooks (draft tasks that wake once their dependencies complete).
Confidence starts at the template's base and drops 0.05 for every required
code whose latest observation lags the document's newest data by more than
180 days.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import timedelta
from typing import Any

from mcpcare.document.model import (
    Hypothesis,
    HypothesisStatus,
    McpDocument,
    TaskKind,
    TaskSpec,
    TaskState,
)
from mcpcare.errors import FixtureInvalid, InsufficientData
from mcpcare.modules import ModuleDescriptor
from mcpcare.modules.scoring import EngagementHistory, adherence_score, project_trajectory

TEMPLATES_FORMAT = "mcp-templates/1"
STALE_AFTER = timedelta(days=180)
STALENESS_PENALTY = 0.05
# Clinically actionable kinds may never reach the gate unattended.
FORCED_APPROVAL_KINDS = frozenset(
    {TaskKind.LAB_ORDER, TaskKind.REFERRAL, TaskKind.MEDICATION_CHANGE, TaskKind.HANDOFF}
)


@dataclass
class Proposal:
    template_id: str
    narrative: str
    rationale: str
    confidence: float
    hypothesis: Hypothesis | None
    tasks: list[TaskSpec] = field(default_factory=list)
    followups: list[TaskSpec] = field(default_factory=list)

    def entity_ids(self) -> list[str]:
        ids = [t.id for t in self.tasks] + [t.id for t in self.followups]
        if self.hypothesis is not None:
            ids.append(self.hypothesis.id)
        return ids


def load_templates(tree: Any) -> list[dict[str, Any]]:
    if not isinstance(tree, dict) or tree.get("format") != TEMPLATES_FORMAT:
        raise FixtureInvalid(f"template set must declare format {TEMPLATES_FORMAT}")
    raw_templates = tree.get("templates")
    if not isinstance(raw_templates, list) or not raw_templates:
        raise FixtureInvalid("template set has no templates array")
    seen: set[str] = set()
    templates: list[dict[str, Any]] = []
    for i, raw in enumerate(raw_templates):
        if not isinstance(raw, dict) or "template_id" not in raw:
            raise FixtureInvalid(f"templates[{i}] needs a template_id")
        tid = str(raw["template_id"])
        if tid in seen:
            raise FixtureInvalid(f"duplicate template_id {tid!r}")
        seen.add(tid)
        _check_template(raw, tid)
        templates.append(raw)
    return templates


def _check_template(raw: dict[str, Any], tid: str) -> None:
    base = raw.get("base_confidence")
    if not isinstance(base, (int, float)) or isinstance(base, bool) or not 0 <= base <= 1:
        raise FixtureInvalid(f"{tid}: base_confidence must be in [0,1]")
    match = raw.get("match", {})
    if not isinstance(match, dict):
        raise FixtureInvalid(f"{tid}: match must be an object")
    codes = match.get("required_codes", [])
    if not isinstance(codes, list) or not all(isinstance(c, str) for c in codes):
        raise FixtureInvalid(f"{tid}: required_codes must be strings")
    local_ids: set[str] = set()
    for bucket in ("tasks", "followups"):
        for j, spec in enumerate(raw.get(bucket, [])):
            if not isinstance(spec, dict):
                raise FixtureInvalid(f"{tid}: {bucket}[{j}] not an object")
            for key in ("id", "kind", "payload", "confidence"):
                if key not in spec:
                    raise FixtureInvalid(f"{tid}: {bucket}[{j}] missing {key}")
            try:
                TaskKind(spec["kind"])
            except ValueError:
                raise FixtureInvalid(f"{tid}: {bucket}[{j}] kind {spec['kind']!r}") from None
            if spec["id"] in local_ids:
                raise FixtureInvalid(f"{tid}: duplicate task id {spec['id']!r}")
            local_ids.add(spec["id"])
    for bucket in ("tasks", "followups"):
        for spec in raw.get(bucket, []):
            for dep in spec.get("depends_on", []):
                if dep not in local_ids:
                    raise FixtureInvalid(f"{tid}: dependency {dep!r} not in template")
    hyp = raw.get("hypothesis")
    if hyp is not None and (not isinstance(hyp, dict) or "id" not in hyp or "condition_code" not in hyp):
        raise FixtureInvalid(f"{tid}: hypothesis needs id and condition_code")


class TemplateEngine:
    """Generative module over a fixed template set."""

    def __init__(self, templates: list[dict[str, Any]], module_id: str = "gen-template/1"):
        self.descriptor = ModuleDescriptor(module_id=module_id, kind="generative", version="1")
        self.templates = templates

    def propose(self, doc: McpDocument) -> list[Proposal]:
        proposals: list[Proposal] = []
        for template in self.templates:
            proposal = self._instantiate(template, doc)
            if proposal is not None:
                proposals.append(proposal)
        proposals.sort(key=lambda p: (-p.confidence, p.template_id))
        return proposals

    def _instantiate(self, template: dict[str, Any], doc: McpDocument) -> Proposal | None:
        match = template.get("match", {})
        required = list(match.get("required_codes", []))
        evidence: list[int] = []
        for code in required:
            idx = _latest_index(doc, code)
            if idx is None:
                return None
            evidence.append(idx)
        if not _age_in_bounds(doc, match):
            return None

        penalty = STALENESS_PENALTY * _stale_code_count(doc, required)
        confidence = _clamp(float(template["base_confidence"]) - penalty)

        tid = str(template["template_id"])
        narrative = str(template.get("narrative", ""))
        narrative += self._enrichment(template.get("enrich"), doc)
        rationale = str(template.get("rationale", "")) or narrative

        hypothesis = None
        hyp_spec = template.get("hypothesis")
        if hyp_spec is not None:
            hypothesis = Hypothesis(
                id=str(hyp_spec["id"]),
                condition_code=str(hyp_spec["condition_code"]),
                narrative=narrative,
                confidence=confidence,
                status=HypothesisStatus.PROVISIONAL,
                evidence_refs=sorted(evidence),
            )

        tasks = [self._task(spec, TaskState.PROPOSED, penalty) for spec in template.get("tasks", [])]
        followups = [self._task(spec, TaskState.DRAFT, penalty) for spec in template.get("followups", [])]
        return Proposal(
            template_id=tid,
            narrative=narrative,
            rationale=rationale,
            confidence=confidence,
            hypothesis=hypothesis,
            tasks=tasks,
            followups=followups,
        )

    def _task(self, spec: dict[str, Any], state: TaskState, penalty: float) -> TaskSpec:
        kind = TaskKind(spec["kind"])
        requires_approval = bool(spec.get("requires_approval", False))
        if kind in FORCED_APPROVAL_KINDS:
            requires_approval = True
        return TaskSpec(
            id=str(spec["id"]),
            kind=kind,
            payload=dict(spec["payload"]),
            state=state,
            confidence=_clamp(float(spec["confidence"]) - penalty),
            requires_approval=requires_approval,
            depends_on=list(spec.get("depends_on", [])),
            fallback_task=spec.get("fallback_task"),
        )

    def _enrichment(self, enrich: dict[str, Any] | None, doc: McpDocument) -> str:
        if not enrich:
            return ""
        parts: list[str] = []
        adherence = enrich.get("adherence")
        if adherence:
            score = _adherence_from_observations(
                doc, str(adherence["adherent_code"]), str(adherence["total_code"])
            )
            if score is not None:
                parts.append(f"adherence_probability={score:.4f}")
        trajectory = enrich.get("trajectory")
        if trajectory:
            code = str(trajectory["code"])
            horizon = float(trajectory["horizon_days"])
            try:
                projection = project_trajectory(doc, code, horizon)
            except InsufficientData:
                projection = None
            if projection is not None:
                parts.append(
                    f"projected_{code}_{horizon:g}d={projection.projected_value:.2f}"
                )
        return (" " + "; ".join(parts)) if parts else ""


def _latest_index(doc: McpDocument, code: str) -> int | None:
    best: int | None = None
    for i, obs in enumerate(doc.observations):
        if obs.code == code and (best is None or obs.timestamp >= doc.observations[best].timestamp):
            best = i
    return best


def _stale_code_count(doc: McpDocument, required: list[str]) -> int:
    if not doc.observations or not required:
        return 0
    reference = max(o.timestamp for o in doc.observations)
    count = 0
    for code in required:
        latest = doc.latest_observation(code)
        if latest is not None and reference - latest.timestamp > STALE_AFTER:
            count += 1
    return count


def _age_in_bounds(doc: McpDocument, match: dict[str, Any]) -> bool:
    lo, hi = match.get("min_age_years"), match.get("max_age_years")
    if lo is None and hi is None:
        return True
    raw = doc.demographics.get("age_years")
    try:
        age = float(raw) if raw is not None else None
    except ValueError:
        age = None
    if age is None:
        return False
    if lo is not None and age < float(lo):
        return False
    if hi is not None and age > float(hi):
        return False
    return True


def _adherence_from_observations(doc: McpDocument, adherent_code: str, total_code: str) -> float | None:
    adherent = doc.latest_observation(adherent_code)
    total = doc.latest_observation(total_code)
    if adherent is None or total is None:
        return None
    try:
        history = EngagementHistory(int(float(adherent.value)), int(float(total.value)))
    except (TypeError, ValueError):
        return None
    return adherence_score(history)


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))
