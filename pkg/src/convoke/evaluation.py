"""Scenario replay and metrics.

A scenario is a scripted conversation: timed utterance steps (with optional
fault injection and consent changes), per-step expectations, and explicit
goal predicates. Metrics follow countable definitions:

  - a breakdown is any turn that resolved to a repair request (which includes
    every UNKNOWN turn);
  - a breakdown is repaired when every goal referencing its step still
    completes, without restarting the session;
  - task success is completed goals over total goals;
  - latency conformance is turns whose response gap lies inside the
    configured window;
  - consent compliance is retained artifacts covered by both a consent grant
    and a permitting policy. This is an auditable proxy for user trust in
    data handling, NOT a measurement of perceived sovereignty, which would
    require community-centered evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .core import BROWSER, GOVERNANCE, MEDIA, PayloadKind, TimedToken, TraceRecord
from .endpointing import SilenceAdvance, StreamEvent
from .errors import FileFormatError, InvalidArgument, Issue
from .governance import RETENTION_NEVER, SCOPE_STORE_AUDIO, SCOPE_STORE_TRANSCRIPT
from .orchestrator import Session, SessionConfig, TurnOutcome, serialize_traces
from .understanding import INTENT_INVENTORY, Lexicon

FAULT_GARBLE = "garble_tokens"
FAULT_DROP = "drop_turn"

CHECK_KINDS = ("action_succeeded", "response_delivered", "no_escalation")

_DEFAULT_GAP_MS = 100
_DEFAULT_TOKEN_MS = 300

_ACTION_AGENTS = (MEDIA, BROWSER)


@dataclass(frozen=True)
class Expected:
    intent: str | None = None
    action: str | None = None  # resolved intent that must succeed, or "none"
    response_kind: str | None = None


@dataclass(frozen=True)
class GoalCheck:
    kind: str
    intent: str | None = None
    text: str | None = None


@dataclass(frozen=True)
class Goal:
    goal_id: str
    steps: tuple[int, ...]  # 1-based step indexes
    checks: tuple[GoalCheck, ...]


@dataclass(frozen=True)
class ScenarioStep:
    index: int  # 1-based
    events: tuple[StreamEvent, ...]
    span_ms: int  # stream time the step consumes
    fault: str | None = None
    consent: tuple[str, str] | None = None  # (scope, action)
    expected: Expected | None = None


@dataclass(frozen=True)
class ScenarioScript:
    scenario_id: str
    steps: tuple[ScenarioStep, ...]
    goals: tuple[Goal, ...]
    config_overrides: Mapping[str, Any] = field(default_factory=dict)
    base_dir: Path = Path(".")


@dataclass(frozen=True)
class BreakdownRecord:
    turn_index: int
    step_index: int
    reason: str
    repaired: bool


@dataclass(frozen=True)
class ScenarioResult:
    scenario_id: str
    outcomes: tuple[TurnOutcome, ...]
    expectation_failures: tuple[str, ...]
    goal_results: Mapping[str, bool]
    breakdowns: tuple[BreakdownRecord, ...]
    escalations: int
    latency_conforming: int
    latency_total: int
    retained_artifacts: int
    compliant_artifacts: int
    gate_violations: tuple[str, ...]
    trace_serialization: str

    @property
    def all_expected_passed(self) -> bool:
        return not self.expectation_failures and not self.gate_violations


@dataclass(frozen=True)
class MetricsReport:
    tsr: float | None
    goals_completed: int
    goals_total: int
    repair_success_rate: float | None
    breakdowns_repaired: int
    breakdowns_total: int
    latency_conformance: float | None
    latency_conforming: int
    latency_total: int
    consent_compliance: float
    compliant_artifacts: int
    retained_artifacts: int
    scenarios: tuple[Mapping[str, Any], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tsr": self.tsr,
            "goals": {"completed": self.goals_completed, "total": self.goals_total},
            "repair_success_rate": self.repair_success_rate,
            "breakdowns": {"repaired": self.breakdowns_repaired, "total": self.breakdowns_total},
            "latency_conformance": self.latency_conformance,
            "latency": {"conforming": self.latency_conforming, "total": self.latency_total},
            "consent_compliance": self.consent_compliance,
            "retention": {"compliant": self.compliant_artifacts, "retained": self.retained_artifacts},
            "consent_compliance_note": (
                "auditable proxy for data-handling control; not a perceived-sovereignty measurement"
            ),
            "scenarios": [dict(s) for s in self.scenarios],
        }

    def render_table(self) -> str:
        def ratio(value: float | None, num: int, den: int) -> str:
            if value is None:
                return f"undefined ({num}/{den})"
            return f"{value:.4f} ({num}/{den})"

        lines = [
            "metric               value",
            "-------------------  -------------------------",
            f"task success rate    {ratio(self.tsr, self.goals_completed, self.goals_total)}",
            f"repair success rate  {ratio(self.repair_success_rate, self.breakdowns_repaired, self.breakdowns_total)}",
            f"latency conformance  {ratio(self.latency_conformance, self.latency_conforming, self.latency_total)}",
            f"consent compliance   {ratio(self.consent_compliance, self.compliant_artifacts, self.retained_artifacts)} [proxy]",
            "",
            "scenario                      goals  breakdowns  expected",
        ]
        for s in self.scenarios:
            lines.append(
                f"{s['scenario_id']:<28}  {s['goals_completed']}/{s['goals_total']}    "
                f"{s['breakdowns_repaired']}/{s['breakdowns_total']}         "
                f"{'ok' if s['all_expected_passed'] else 'FAILED'}"
            )
        return "\n".join(lines) + "\n"


# -- loading ----------------------------------------------------------------


def load_scenario(path: str | Path) -> ScenarioScript:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FileFormatError(str(path), [Issue(exc.lineno, "parse-error", exc.msg)]) from exc
    return parse_scenario(data, source=str(path), base_dir=path.parent)


def parse_scenario(
    data: Mapping[str, Any], source: str = "<scenario>", base_dir: str | Path = "."
) -> ScenarioScript:
    issues: list[Issue] = []
    scenario_id = str(data.get("scenario_id", "")).strip()
    if not scenario_id:
        issues.append(Issue(0, "validation", "scenario_id is required"))
    raw_steps = data.get("steps", [])
    if not raw_steps:
        issues.append(Issue(0, "validation", "steps must be a non-empty list"))

    steps: list[ScenarioStep] = []
    cursor = 0
    for position, raw in enumerate(raw_steps, start=1):
        step, cursor = _parse_step(raw, position, cursor, issues)
        if step is not None:
            steps.append(step)

    goals: list[Goal] = []
    seen_goal_ids: set[str] = set()
    for raw in data.get("goals", []):
        goal_id = str(raw.get("goal_id", "")).strip()
        if not goal_id:
            issues.append(Issue(0, "validation", "goal missing goal_id"))
            continue
        if goal_id in seen_goal_ids:
            issues.append(Issue(0, "validation", f"duplicate goal_id {goal_id!r}"))
            continue
        seen_goal_ids.add(goal_id)
        step_refs = tuple(int(i) for i in raw.get("steps", []))
        if not step_refs:
            issues.append(Issue(0, "validation", f"goal {goal_id!r} references no steps"))
            continue
        bad = [i for i in step_refs if not (1 <= i <= len(raw_steps))]
        if bad:
            issues.append(
                Issue(0, "validation", f"goal {goal_id!r} references missing steps {bad}")
            )
            continue
        checks: list[GoalCheck] = []
        for check in raw.get("checks", []):
            kind = str(check.get("kind", ""))
            if kind not in CHECK_KINDS:
                issues.append(Issue(0, "validation", f"goal {goal_id!r}: unknown check kind {kind!r}"))
                continue
            checks.append(
                GoalCheck(kind=kind, intent=check.get("intent"), text=check.get("text"))
            )
        if not checks:
            issues.append(Issue(0, "validation", f"goal {goal_id!r} has no checks"))
            continue
        goals.append(Goal(goal_id=goal_id, steps=step_refs, checks=tuple(checks)))

    if issues:
        raise FileFormatError(source, issues)
    return ScenarioScript(
        scenario_id=scenario_id,
        steps=tuple(steps),
        goals=tuple(goals),
        config_overrides=dict(data.get("config_overrides", {})),
        base_dir=Path(base_dir),
    )


def _parse_step(
    raw: Mapping[str, Any], position: int, cursor: int, issues: list[Issue]
) -> tuple[ScenarioStep | None, int]:
    where = f"step {position}"
    fault = raw.get("fault")
    if fault is not None and fault not in (FAULT_GARBLE, FAULT_DROP):
        issues.append(Issue(0, "validation", f"{where}: unknown fault {fault!r}"))
        return None, cursor
    consent: tuple[str, str] | None = None
    if "consent" in raw:
        c = raw["consent"]
        scope, action = str(c.get("scope", "")), str(c.get("action", ""))
        if not scope or action not in ("grant", "revoke"):
            issues.append(Issue(0, "validation", f"{where}: consent needs scope and grant/revoke"))
            return None, cursor
        consent = (scope, action)

    has_utterance = "utterance" in raw
    has_events = "events" in raw
    if has_utterance and has_events:
        issues.append(Issue(0, "validation", f"{where}: give either utterance or events, not both"))
        return None, cursor
    if not has_utterance and not has_events and consent is None:
        issues.append(Issue(0, "validation", f"{where}: empty step"))
        return None, cursor

    events: list[StreamEvent] = []
    start_cursor = cursor
    if has_utterance:
        words = str(raw["utterance"]).split()
        if not words:
            issues.append(Issue(0, "validation", f"{where}: utterance is empty"))
            return None, cursor
        gaps = [int(g) for g in raw.get("gaps_ms", [])] or [_DEFAULT_GAP_MS] * (len(words) - 1)
        if len(gaps) != max(0, len(words) - 1):
            issues.append(
                Issue(0, "validation", f"{where}: need {len(words) - 1} gaps, got {len(gaps)}")
            )
            return None, cursor
        duration = int(raw.get("token_duration_ms", _DEFAULT_TOKEN_MS))
        trailing = int(raw.get("trailing_silence_ms", 1200))
        for i, word in enumerate(words):
            events.append(TimedToken(surface=word, start_ms=cursor, end_ms=cursor + duration))
            cursor += duration
            if i < len(words) - 1:
                cursor += gaps[i]
        events.append(SilenceAdvance(trailing))
        cursor += trailing
    elif has_events:
        for raw_event in raw["events"]:
            if "silence_ms" in raw_event:
                delta = int(raw_event["silence_ms"])
                if delta < 0:
                    issues.append(Issue(0, "validation", f"{where}: negative silence"))
                    return None, cursor
                events.append(SilenceAdvance(delta))
                cursor += delta
                continue
            try:
                token = TimedToken.from_dict(raw_event)
            except Exception as exc:
                issues.append(Issue(0, "validation", f"{where}: bad token: {exc}"))
                return None, cursor
            if token.start_ms < cursor:
                issues.append(
                    Issue(
                        0,
                        "validation",
                        f"{where}: token {token.surface!r} at {token.start_ms}ms is "
                        f"time-disordered (stream already at {cursor}ms)",
                    )
                )
                return None, cursor
            events.append(token)
            cursor = token.end_ms

    expected: Expected | None = None
    if "expected" in raw:
        if fault == FAULT_DROP:
            issues.append(Issue(0, "validation", f"{where}: drop_turn steps cannot carry expectations"))
            return None, cursor
        e = raw["expected"]
        intent = e.get("intent")
        if intent is not None and intent not in INTENT_INVENTORY:
            issues.append(Issue(0, "validation", f"{where}: unknown expected intent {intent!r}"))
            return None, cursor
        expected = Expected(
            intent=intent, action=e.get("action"), response_kind=e.get("response_kind")
        )

    return (
        ScenarioStep(
            index=position,
            events=tuple(events),
            span_ms=cursor - start_cursor,
            fault=fault,
            consent=consent,
            expected=expected,
        ),
        cursor,
    )


# -- fault injection ---------------------------------------------------------


def garble(events: Sequence[StreamEvent], lexicon: Lexicon, counter_start: int) -> tuple[list[StreamEvent], int]:
    """Replace every token surface with deterministic junk guaranteed absent
    from the lexicon, preserving all timing."""
    out: list[StreamEvent] = []
    counter = counter_start
    for event in events:
        if isinstance(event, TimedToken):
            counter += 1
            junk = f"zzgarble{counter}"
            while lexicon.lookup(junk) is not None:
                junk += "q"
            out.append(
                TimedToken(
                    surface=junk,
                    start_ms=event.start_ms,
                    end_ms=event.end_ms,
                    language_tag=event.language_tag,
                )
            )
        else:
            out.append(event)
    return out, counter


# -- running ------------------------------------------------------------------


def _deep_merge(base: Mapping[str, Any], overlay: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overlay.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def run_scenario(
    script: ScenarioScript,
    base_config: Mapping[str, Any],
    base_dir: str | Path = ".",
) -> ScenarioResult:
    overrides = dict(script.config_overrides)
    for key in ("lexicon_path", "policy_path", "template_path"):
        if key in overrides:
            overrides[key] = str((script.base_dir / str(overrides[key])).resolve())
    config = SessionConfig.from_dict(_deep_merge(base_config, overrides), base_dir=base_dir)
    session = Session(config)

    expectation_failures: list[str] = []
    turn_to_step: dict[int, int] = {}
    garble_counter = 0

    for step in script.steps:
        if step.consent is not None:
            session.update_consent(*step.consent)
        events: Sequence[StreamEvent] = step.events
        if step.fault == FAULT_GARBLE:
            events, garble_counter = garble(events, session.lexicon, garble_counter)
        elif step.fault == FAULT_DROP:
            events = [SilenceAdvance(step.span_ms)] if step.span_ms else []
        outcomes = session.submit_events(list(events))
        for outcome in outcomes:
            turn_to_step[outcome.turn_index] = step.index
        if step.expected is not None:
            failure = _check_expected(step, outcomes)
            if failure:
                expectation_failures.append(failure)

    goal_results = {
        goal.goal_id: _goal_completed(goal, session.outcomes, turn_to_step)
        for goal in script.goals
    }

    breakdowns: list[BreakdownRecord] = []
    for outcome in session.outcomes:
        if outcome.repair_reason is None:
            continue
        step_index = turn_to_step.get(outcome.turn_index, 0)
        owning = [g for g in script.goals if step_index in g.steps]
        if owning:
            repaired = all(goal_results[g.goal_id] for g in owning)
        else:
            repaired = bool(goal_results) and all(goal_results.values())
        breakdowns.append(
            BreakdownRecord(
                turn_index=outcome.turn_index,
                step_index=step_index,
                reason=outcome.repair_reason,
                repaired=repaired,
            )
        )

    conforming = sum(
        1
        for o in session.outcomes
        if config.latency_floor_ms <= o.response_gap_ms <= config.latency_ceiling_ms
    )
    compliant, retained = audit_retention(session)
    gate_violations = [
        violation for trace in session.traces for violation in find_gate_violations(trace)
    ]

    return ScenarioResult(
        scenario_id=script.scenario_id,
        outcomes=tuple(session.outcomes),
        expectation_failures=tuple(expectation_failures),
        goal_results=goal_results,
        breakdowns=tuple(breakdowns),
        escalations=session.escalations,
        latency_conforming=conforming,
        latency_total=len(session.outcomes),
        retained_artifacts=retained,
        compliant_artifacts=compliant,
        gate_violations=tuple(gate_violations),
        trace_serialization=serialize_traces(session.traces),
    )


def _check_expected(step: ScenarioStep, outcomes: Sequence[TurnOutcome]) -> str | None:
    where = f"step {step.index}"
    if len(outcomes) != 1:
        return f"{where}: expected exactly one turn, got {len(outcomes)}"
    outcome = outcomes[0]
    expected = step.expected
    assert expected is not None
    if expected.intent is not None and outcome.intent != expected.intent:
        return f"{where}: expected intent {expected.intent}, got {outcome.intent}"
    if expected.action is not None:
        succeeded = outcome.resolved_intent if any(
            a.status == "success" for a in outcome.actions
        ) else None
        if expected.action == "none":
            if succeeded is not None:
                return f"{where}: expected no action, got {succeeded}"
        elif succeeded != expected.action:
            return f"{where}: expected action {expected.action}, got {succeeded}"
    if expected.response_kind is not None and outcome.response_kind != expected.response_kind:
        return (
            f"{where}: expected response kind {expected.response_kind}, got {outcome.response_kind}"
        )
    return None


def _goal_completed(
    goal: Goal, outcomes: Sequence[TurnOutcome], turn_to_step: Mapping[int, int]
) -> bool:
    scoped = [o for o in outcomes if turn_to_step.get(o.turn_index) in goal.steps]
    for check in goal.checks:
        if check.kind == "action_succeeded":
            ok = any(
                o.resolved_intent == check.intent and any(a.status == "success" for a in o.actions)
                for o in scoped
            )
        elif check.kind == "response_delivered":
            ok = any(o.delivered == check.text for o in scoped)
        else:  # no_escalation
            ok = not any(o.escalated for o in scoped)
        if not ok:
            return False
    return True


def compute_metrics(results: Sequence[ScenarioResult]) -> MetricsReport:
    if not results:
        raise InvalidArgument("compute_metrics requires at least one scenario result")
    goals_total = sum(len(r.goal_results) for r in results)
    goals_completed = sum(sum(1 for ok in r.goal_results.values() if ok) for r in results)
    breakdowns_total = sum(len(r.breakdowns) for r in results)
    breakdowns_repaired = sum(sum(1 for b in r.breakdowns if b.repaired) for r in results)
    latency_total = sum(r.latency_total for r in results)
    latency_conforming = sum(r.latency_conforming for r in results)
    retained = sum(r.retained_artifacts for r in results)
    compliant = sum(r.compliant_artifacts for r in results)
    return MetricsReport(
        tsr=(goals_completed / goals_total) if goals_total else None,
        goals_completed=goals_completed,
        goals_total=goals_total,
        repair_success_rate=(breakdowns_repaired / breakdowns_total) if breakdowns_total else None,
        breakdowns_repaired=breakdowns_repaired,
        breakdowns_total=breakdowns_total,
        latency_conformance=(latency_conforming / latency_total) if latency_total else None,
        latency_conforming=latency_conforming,
        latency_total=latency_total,
        consent_compliance=(compliant / retained) if retained else 1.0,
        compliant_artifacts=compliant,
        retained_artifacts=retained,
        scenarios=tuple(
            {
                "scenario_id": r.scenario_id,
                "goals_completed": sum(1 for ok in r.goal_results.values() if ok),
                "goals_total": len(r.goal_results),
                "breakdowns_repaired": sum(1 for b in r.breakdowns if b.repaired),
                "breakdowns_total": len(r.breakdowns),
                "latency_conforming": r.latency_conforming,
                "latency_total": r.latency_total,
                "escalations": r.escalations,
                "all_expected_passed": r.all_expected_passed,
            }
            for r in results
        ),
    )


# -- trace and retention auditors (independent of the pipeline's own gating) --


def find_gate_violations(trace: TraceRecord) -> list[str]:
    """Scan one turn's trace: every action step needs a prior governance
    allow for an action, every delivery needs a prior response allow."""
    violations: list[str] = []
    action_allowed_at: int | None = None
    response_allowed_at: int | None = None
    for position, step in enumerate(trace.steps):
        if step.agent == GOVERNANCE and step.kind_out is PayloadKind.POLICY_DECISION:
            if step.summary.startswith("allow action("):
                action_allowed_at = position
            elif step.summary.startswith("allow response("):
                response_allowed_at = position
        if step.agent in _ACTION_AGENTS and step.kind_out is PayloadKind.ACTION_RESULT:
            if action_allowed_at is None or action_allowed_at > position:
                violations.append(
                    f"{trace.correlation_id}: action step at position {position} without prior allow"
                )
        if step.kind_out is PayloadKind.RESPONSE_DELIVERY:
            # Cancelled deliveries never reached the user; withheld turns only
            # emit the built-in status marker, not a response.
            is_response = not step.summary.startswith(
                ("delivery cancelled", "response withheld")
            )
            if is_response and (response_allowed_at is None or response_allowed_at > position):
                violations.append(
                    f"{trace.correlation_id}: delivery at position {position} without response allow"
                )
    return violations


def audit_retention(session: Session) -> tuple[int, int]:
    """Re-derive compliance for every retained artifact from consent history
    and policy, independently of the retention decisions themselves. Returns
    (compliant, retained)."""
    scope_for = {"audio": SCOPE_STORE_AUDIO, "transcript": SCOPE_STORE_TRANSCRIPT}
    compliant = 0
    for artifact in session.retention_store:
        has_consent = session.consent.effective(
            scope_for[artifact.artifact_kind], artifact.turn_index
        )
        policy_permits = session.policy.retention_default != RETENTION_NEVER
        if has_consent and policy_permits:
            compliant += 1
    return compliant, len(session.retention_store)
