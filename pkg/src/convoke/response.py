"""Template-based response planning and rendering.

Shipped template text is deliberately thin: only community-attested Guarani
appears as real text, everything else is a bracketed curation marker so that
replacing it is a data-file edit, not a code change. Template completeness
(at least one template per kind) is checked at load time; a turn must never
fail because the planner had nothing to say.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

from .actions import ActionResult
from .dialogue import DialogueState, RepairRequest, ResolvedIntent, most_salient
from .errors import ConfigError, FileFormatError, Issue
from .governance import ASK, PolicyDecision
from .textfmt import parse_kv, parse_sections

KIND_CONFIRMATION = "confirmation"
KIND_DENIAL = "denial"
KIND_REPAIR = "repair_prompt"
KIND_CONSENT = "consent_prompt"

RESPONSE_KINDS = (KIND_CONFIRMATION, KIND_DENIAL, KIND_REPAIR, KIND_CONSENT)

# Built-in fallback when governance vetoes the planned response (a
# non-linguistic status marker, so the turn still closes).
WITHHELD_MARKER = "[response-withheld]"

_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")
_TEXT_RE = re.compile(r'text="([^"]*)"')

ResponseTrigger = Union[ActionResult, PolicyDecision, RepairRequest, ResolvedIntent]


@dataclass(frozen=True)
class Template:
    template_id: str
    kind: str
    text: str
    fills: tuple[str, ...] = ()


@dataclass(frozen=True)
class TemplateSet:
    templates: Mapping[str, Template]
    order: tuple[str, ...]  # file order, used for deterministic selection
    version: str = "0"

    def first_of_kind(self, kind: str) -> Template:
        for template_id in self.order:
            template = self.templates[template_id]
            if template.kind == kind:
                return template
        raise ConfigError(f"no template of kind {kind!r} loaded")


@dataclass(frozen=True)
class ResponsePlan:
    kind: str
    template_id: str
    fills: Mapping[str, str]
    target_language: str = "gn"


def load_templates(path: str | Path) -> TemplateSet:
    path = Path(path)
    return parse_templates(path.read_text(encoding="utf-8"), source=str(path))


def parse_templates(text: str, source: str = "<templates>") -> TemplateSet:
    doc = parse_sections(text, known_sections=("templates",))
    issues = doc.issues
    templates: dict[str, Template] = {}
    order: list[str] = []
    for line in doc.section("templates"):
        raw = " ".join(line.fields)
        match = _TEXT_RE.search(raw)
        if match is None:
            issues.append(Issue(line.number, "parse-error", 'missing text="..." field'))
            continue
        body = match.group(1)
        rest = (raw[: match.start()] + raw[match.end() :]).split()
        template_id = rest[0] if rest else ""
        if not template_id:
            issues.append(Issue(line.number, "parse-error", "missing template id"))
            continue
        kv = parse_kv(tuple(rest[1:]), line.number, ("kind", "fills"), issues)
        kind = kv.get("kind", "")
        if kind not in RESPONSE_KINDS:
            issues.append(Issue(line.number, "parse-error", f"unknown response kind {kind!r}"))
            continue
        if template_id in templates:
            issues.append(
                Issue(line.number, "parse-error", f"duplicate template_id {template_id!r}")
            )
            continue
        fills = tuple(f for f in kv.get("fills", "").split(",") if f)
        undeclared = [p for p in _PLACEHOLDER_RE.findall(body) if p not in fills]
        if undeclared:
            issues.append(
                Issue(
                    line.number,
                    "parse-error",
                    f"placeholders {undeclared} not in declared fills {list(fills)}",
                )
            )
            continue
        templates[template_id] = Template(
            template_id=template_id, kind=kind, text=body, fills=fills
        )
        order.append(template_id)

    if issues:
        raise FileFormatError(source, issues)
    missing = [k for k in RESPONSE_KINDS if not any(t.kind == k for t in templates.values())]
    if missing:
        raise FileFormatError(
            source,
            [Issue(0, "missing-kind", f"no template for kind {k!r}") for k in missing],
        )
    return TemplateSet(templates=templates, order=tuple(order), version=doc.version)


def plan_response(
    state: DialogueState, trigger: ResponseTrigger, templates: TemplateSet
) -> ResponsePlan:
    """Map this turn's conclusive event to a plan.

    Success -> confirmation, failure or deny -> denial, repair -> repair
    prompt, ask -> consent prompt, and a non-action resolved intent (a bare
    acknowledgement) -> confirmation.
    """
    focus = most_salient(state)
    fills: dict[str, str] = {"target": focus.entity_id if focus else ""}
    if isinstance(trigger, ActionResult):
        kind = KIND_CONFIRMATION if trigger.status == "success" else KIND_DENIAL
        fills["effects"] = trigger.effects
        fills["rule_id"] = ""
    elif isinstance(trigger, PolicyDecision):
        kind = KIND_CONSENT if trigger.verdict == ASK else KIND_DENIAL
        fills["rule_id"] = trigger.rule_id
        fills["category"] = trigger.category
    elif isinstance(trigger, RepairRequest):
        kind = KIND_REPAIR
        fills["reason"] = trigger.reason
    elif isinstance(trigger, ResolvedIntent):
        kind = KIND_CONFIRMATION
        fills["effects"] = trigger.resolution_notes
    else:  # pragma: no cover - trigger union is closed
        raise ConfigError(f"unplannable trigger type {type(trigger).__name__}")
    template = templates.first_of_kind(kind)
    return ResponsePlan(
        kind=kind,
        template_id=template.template_id,
        fills={k: fills.get(k, "") for k in template.fills},
    )


def render(plan: ResponsePlan, templates: TemplateSet) -> str:
    template = templates.templates.get(plan.template_id)
    if template is None:
        raise ConfigError(f"unknown template_id {plan.template_id!r}")
    text = template.text
    for name in template.fills:
        text = text.replace("{" + name + "}", str(plan.fills.get(name, "")))
    return text
