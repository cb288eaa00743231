"""The gatekeeper: community policy rules, per-session consent, and retention
control with never-store defaults.

Everything defaults closed: actions are denied unless a rule allows them,
and nothing is retained unless consent AND policy both permit it. Response
kinds the system needs to explain itself (confirmation, denial, repair
prompt) default open so a misconfigured policy cannot strike the system
mute; consent prompts are not on that list and need an explicit rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import FileFormatError, Issue
from .textfmt import parse_kv, parse_sections

ALLOW = "allow"
DENY = "deny"
ASK = "ask"

RETENTION_NEVER = "never"
RETENTION_SESSION = "session"
RETENTION_PERSISTENT = "persistent"

DISCARD = "discard"
KEEP_SESSION = "keep_session"
KEEP_PERSISTENT = "keep_persistent"

SCOPE_STORE_AUDIO = "store_audio"
SCOPE_STORE_TRANSCRIPT = "store_transcript"

# Response kinds that remain expressible with no policy loaded.
_DEFAULT_ALLOWED_RESPONSE_KINDS = ("confirmation", "denial", "repair_prompt")

_ARTIFACT_SCOPES = {"audio": SCOPE_STORE_AUDIO, "transcript": SCOPE_STORE_TRANSCRIPT}


@dataclass(frozen=True)
class ActionRule:
    rule_id: str
    category: str  # exact category name, or "*"
    verdict: str


@dataclass(frozen=True)
class ResponseRule:
    rule_id: str
    kind: str  # response kind, or "*"
    verdict: str  # allow/deny only; "ask" makes no sense for output


@dataclass(frozen=True)
class PolicyRuleSet:
    action_rules: tuple[ActionRule, ...] = ()
    response_rules: tuple[ResponseRule, ...] = ()
    retention_default: str = RETENTION_NEVER
    default_verdict: str = DENY
    version: str = "0"


@dataclass(frozen=True)
class ConsentEvent:
    scope: str
    granted: bool  # False = revocation
    turn_index: int  # effective from this turn on


@dataclass(frozen=True)
class ConsentState:
    events: tuple[ConsentEvent, ...] = ()

    def record(self, scope: str, granted: bool, turn_index: int) -> "ConsentState":
        return ConsentState(events=self.events + (ConsentEvent(scope, granted, turn_index),))

    def effective(self, scope: str, at_turn: int) -> bool:
        """Latest grant/revocation whose turn index is <= at_turn wins."""
        status = False
        for event in self.events:
            if event.scope == scope and event.turn_index <= at_turn:
                status = event.granted
        return status


@dataclass(frozen=True)
class PolicyDecision:
    verdict: str
    rule_id: str  # or "default"
    rationale: str
    decided_at_ms: int
    category: str = ""  # matched category (actions) or response kind


@dataclass(frozen=True)
class AuditEntry:
    correlation_id: str
    subject: str  # action | response | retention | consent
    decision: PolicyDecision | None
    payload_summary: str


def load_policy(path: str | Path) -> PolicyRuleSet:
    path = Path(path)
    return parse_policy(path.read_text(encoding="utf-8"), source=str(path))


def parse_policy(text: str, source: str = "<policy>") -> PolicyRuleSet:
    doc = parse_sections(
        text, known_sections=("action_rules", "response_rules", "retention", "default")
    )
    issues = doc.issues
    rule_lines: dict[str, int] = {}
    action_rules: list[ActionRule] = []
    for line in doc.section("action_rules"):
        rule_id = line.fields[0]
        kv = parse_kv(line.fields[1:], line.number, ("category", "verdict"), issues)
        if rule_id in rule_lines:
            issues.append(
                Issue(
                    line.number,
                    "policy-conflict",
                    f"duplicate rule_id {rule_id!r} (first at line {rule_lines[rule_id]})",
                )
            )
            continue
        rule_lines[rule_id] = line.number
        verdict = kv.get("verdict", "")
        if verdict not in (ALLOW, DENY, ASK):
            issues.append(Issue(line.number, "parse-error", f"unknown verdict {verdict!r}"))
            continue
        category = kv.get("category", "")
        if not category:
            issues.append(Issue(line.number, "parse-error", f"rule {rule_id!r} missing category="))
            continue
        action_rules.append(ActionRule(rule_id=rule_id, category=category, verdict=verdict))

    response_rules: list[ResponseRule] = []
    for line in doc.section("response_rules"):
        rule_id = line.fields[0]
        kv = parse_kv(line.fields[1:], line.number, ("kind", "verdict"), issues)
        if rule_id in rule_lines:
            issues.append(
                Issue(
                    line.number,
                    "policy-conflict",
                    f"duplicate rule_id {rule_id!r} (first at line {rule_lines[rule_id]})",
                )
            )
            continue
        rule_lines[rule_id] = line.number
        verdict = kv.get("verdict", "")
        if verdict not in (ALLOW, DENY):
            issues.append(
                Issue(line.number, "parse-error", f"response verdict must be allow/deny, got {verdict!r}")
            )
            continue
        kind = kv.get("kind", "")
        if not kind:
            issues.append(Issue(line.number, "parse-error", f"rule {rule_id!r} missing kind="))
            continue
        response_rules.append(ResponseRule(rule_id=rule_id, kind=kind, verdict=verdict))

    retention = RETENTION_NEVER
    seen_retention = False
    for line in doc.section("retention"):
        kv = parse_kv(line.fields, line.number, ("default",), issues)
        value = kv.get("default", "")
        if seen_retention:
            issues.append(Issue(line.number, "parse-error", "retention already set"))
            continue
        seen_retention = True
        if value not in (RETENTION_NEVER, RETENTION_SESSION, RETENTION_PERSISTENT):
            issues.append(Issue(line.number, "parse-error", f"unknown retention {value!r}"))
        else:
            retention = value

    default_verdict = DENY
    seen_default = False
    for line in doc.section("default"):
        kv = parse_kv(line.fields, line.number, ("verdict",), issues)
        value = kv.get("verdict", "")
        if seen_default:
            issues.append(Issue(line.number, "parse-error", "default verdict already set"))
            continue
        seen_default = True
        if value not in (ALLOW, DENY):
            issues.append(Issue(line.number, "parse-error", f"default verdict must be allow/deny, got {value!r}"))
        else:
            default_verdict = value

    if issues:
        raise FileFormatError(source, issues)
    return PolicyRuleSet(
        action_rules=tuple(action_rules),
        response_rules=tuple(response_rules),
        retention_default=retention,
        default_verdict=default_verdict,
        version=doc.version,
    )


def evaluate_action(
    policy: PolicyRuleSet,
    consent: ConsentState,
    intent: str,
    category: str,
    turn_index: int,
    decided_at_ms: int,
) -> PolicyDecision:
    """First matching rule wins; no match falls to the default verdict. An
    `ask` verdict consults standing consent for the category scope and
    becomes allow when granted."""
    for rule in policy.action_rules:
        if rule.category not in ("*", category):
            continue
        verdict = rule.verdict
        if verdict == ASK:
            scope = f"category:{category}"
            if consent.effective(scope, turn_index):
                return PolicyDecision(
                    verdict=ALLOW,
                    rule_id=rule.rule_id,
                    rationale=(
                        f"allow action({intent}) category={category} rule={rule.rule_id} "
                        f"via consent {scope}"
                    ),
                    decided_at_ms=decided_at_ms,
                    category=category,
                )
            return PolicyDecision(
                verdict=ASK,
                rule_id=rule.rule_id,
                rationale=f"ask action({intent}) category={category} rule={rule.rule_id}: no standing consent",
                decided_at_ms=decided_at_ms,
                category=category,
            )
        return PolicyDecision(
            verdict=verdict,
            rule_id=rule.rule_id,
            rationale=f"{verdict} action({intent}) category={category} rule={rule.rule_id}",
            decided_at_ms=decided_at_ms,
            category=category,
        )
    return PolicyDecision(
        verdict=policy.default_verdict,
        rule_id="default",
        rationale=f"{policy.default_verdict} action({intent}) category={category} rule=default",
        decided_at_ms=decided_at_ms,
        category=category,
    )


def evaluate_response(
    policy: PolicyRuleSet,
    kind: str,
    decided_at_ms: int,
) -> PolicyDecision:
    for rule in policy.response_rules:
        if rule.kind in ("*", kind):
            return PolicyDecision(
                verdict=rule.verdict,
                rule_id=rule.rule_id,
                rationale=f"{rule.verdict} response({kind}) rule={rule.rule_id}",
                decided_at_ms=decided_at_ms,
                category=kind,
            )
    if kind in _DEFAULT_ALLOWED_RESPONSE_KINDS:
        return PolicyDecision(
            verdict=ALLOW,
            rule_id="default",
            rationale=f"allow response({kind}) rule=default (self-explanation kinds stay open)",
            decided_at_ms=decided_at_ms,
            category=kind,
        )
    return PolicyDecision(
        verdict=policy.default_verdict,
        rule_id="default",
        rationale=f"{policy.default_verdict} response({kind}) rule=default",
        decided_at_ms=decided_at_ms,
        category=kind,
    )


def decide_retention(
    policy: PolicyRuleSet,
    consent: ConsentState,
    artifact_kind: str,
    turn_index: int,
) -> str:
    """Discard unless the matching store_* scope is granted AND the policy's
    retention setting permits keeping anything. Both conditions required."""
    scope = _ARTIFACT_SCOPES.get(artifact_kind)
    if scope is None:
        return DISCARD
    if not consent.effective(scope, turn_index):
        return DISCARD
    if policy.retention_default == RETENTION_SESSION:
        return KEEP_SESSION
    if policy.retention_default == RETENTION_PERSISTENT:
        return KEEP_PERSISTENT
    return DISCARD
