"""Session runtime: one logical processing thread per session, a FIFO message
bus, and a fixed pipeline per completed turn:

    segment -> understand -> resolve -> (gate -> act) -> plan -> gate -> deliver

The (gate -> act) pair only exists for action-bearing intents; repair and
acknowledgement turns route straight to the response agent. Every hop is an
AgentMessage and exactly one trace step, so the trace alone is enough to
audit gate ordering. Delivery is scheduled at the pipeline's accumulated
agent cost past turn completion and can be cancelled by a barge-in token
arriving earlier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import governance as gov
from .actions import ActionRegistry, ActionResult, BrowserAgent, MediaAgent, dispatch
from .core import (
    CONVERSATION_STATE,
    GOVERNANCE,
    RESPONSE,
    SPEECH,
    UNDERSTANDING,
    USER,
    AgentMessage,
    PayloadKind,
    SimulatedClock,
    TimedToken,
    TraceRecord,
    TraceStep,
    Utterance,
    advance_clock_to,
    append_step,
    canonical_json,
)
from .dialogue import DialogueState, RepairRequest, ResolvedIntent, commit_turn, resolve
from .endpointing import (
    EndpointConfig,
    EndpointerState,
    EndpointEventKind,
    StreamEvent,
    ingest,
)
from .errors import (
    ConvokeError,
    FileFormatError,
    InvalidScope,
    NotFound,
    SessionCreationError,
    StreamOrderViolation,
)
from .governance import (
    ALLOW,
    AuditEntry,
    ConsentState,
    PolicyDecision,
    PolicyRuleSet,
    decide_retention,
    evaluate_action,
    evaluate_response,
    load_policy,
)
from .response import (
    TemplateSet,
    WITHHELD_MARKER,
    load_templates,
    plan_response,
    render,
)
from .understanding import Lexicon, load_lexicon, parse_intent

# Intents that complete without any action agent (bare acknowledgements).
ACK_INTENTS = frozenset({"CONFIRMATION"})

CONSENT_GRANT = "grant"
CONSENT_REVOKE = "revoke"


@dataclass(frozen=True)
class SessionConfig:
    lexicon_path: Path
    policy_path: Path
    template_path: Path
    endpoint: EndpointConfig = EndpointConfig()
    per_agent_cost_ms: Mapping[str, int] = field(default_factory=dict)
    max_repair_attempts: int = 2
    playlist: tuple[str, ...] = ()
    tabs: tuple[tuple[str, str], ...] = ()
    latency_floor_ms: int = 0
    latency_ceiling_ms: int = 2000
    speaker_id: str = "user"

    def __post_init__(self) -> None:
        if self.latency_floor_ms >= self.latency_ceiling_ms:
            raise SessionCreationError(
                f"latency window floor_ms={self.latency_floor_ms} must be below "
                f"ceiling_ms={self.latency_ceiling_ms}"
            )
        if self.max_repair_attempts < 1:
            raise SessionCreationError("max_repair_attempts must be >= 1")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | Path = ".") -> "SessionConfig":
        base = Path(base_dir)
        try:
            endpoint = EndpointConfig(**{k: int(v) for k, v in data.get("endpoint", {}).items()})
        except (TypeError, ConvokeError) as exc:
            raise SessionCreationError(f"invalid endpoint config: {exc}") from exc
        missing = [k for k in ("lexicon_path", "policy_path", "template_path") if not data.get(k)]
        if missing:
            raise SessionCreationError(f"config missing {', '.join(missing)}", missing[0])
        fixtures = data.get("fixtures", {})
        window = data.get("latency_window", {})
        return cls(
            lexicon_path=(base / str(data["lexicon_path"])).resolve(),
            policy_path=(base / str(data["policy_path"])).resolve(),
            template_path=(base / str(data["template_path"])).resolve(),
            endpoint=endpoint,
            per_agent_cost_ms={str(k): int(v) for k, v in data.get("per_agent_cost_ms", {}).items()},
            max_repair_attempts=int(data.get("max_repair_attempts", 2)),
            playlist=tuple(str(t) for t in fixtures.get("playlist", ())),
            tabs=tuple((str(a), str(b)) for a, b in fixtures.get("tabs", ())),
            latency_floor_ms=int(window.get("floor_ms", 0)),
            latency_ceiling_ms=int(window.get("ceiling_ms", 2000)),
            speaker_id=str(data.get("speaker_id", "user")),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "SessionConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise SessionCreationError(f"config file not found: {path}", str(path)) from exc
        except json.JSONDecodeError as exc:
            raise SessionCreationError(f"config file is not valid JSON: {path}: {exc}", str(path)) from exc
        return cls.from_dict(data, base_dir=path.parent)


@dataclass(frozen=True)
class RetainedArtifact:
    turn_index: int
    artifact_kind: str  # audio | transcript
    content: Any
    retention: str  # keep_session | keep_persistent


@dataclass(frozen=True)
class TurnOutcome:
    turn_index: int
    correlation_id: str
    utterance_text: str
    intent: str
    polarity: str
    resolved_intent: str | None
    repair_reason: str | None
    escalated: bool
    actions: tuple[ActionResult, ...]
    delivered: str | None
    response_kind: str
    cancelled: bool
    response_gap_ms: int
    trace: TraceRecord

    def to_dict(self) -> dict[str, Any]:
        return {
            "turn_index": self.turn_index,
            "correlation_id": self.correlation_id,
            "utterance_text": self.utterance_text,
            "intent": self.intent,
            "polarity": self.polarity,
            "resolved_intent": self.resolved_intent,
            "repair_reason": self.repair_reason,
            "escalated": self.escalated,
            "actions": [a.to_dict() for a in self.actions],
            "delivered": self.delivered,
            "response_kind": self.response_kind,
            "cancelled": self.cancelled,
            "response_gap_ms": self.response_gap_ms,
            "trace": self.trace.to_dict(),
        }


@dataclass
class _PendingDelivery:
    deliver_at_ms: int
    text: str
    withheld: bool
    outcome_base: dict[str, Any]
    trace: TraceRecord
    correlation_id: str


class Session:
    """All mutation happens on the caller's thread; callers are expected to
    serialize access (the gateway holds one lock per session)."""

    def __init__(self, config: SessionConfig):
        self.config = config
        try:
            self.lexicon: Lexicon = load_lexicon(config.lexicon_path)
        except FileNotFoundError as exc:
            raise SessionCreationError(
                f"lexicon file not found: {config.lexicon_path}", str(config.lexicon_path)
            ) from exc
        except FileFormatError as exc:
            raise SessionCreationError(f"lexicon invalid: {exc}", str(config.lexicon_path)) from exc
        try:
            self.policy: PolicyRuleSet = load_policy(config.policy_path)
        except FileNotFoundError as exc:
            raise SessionCreationError(
                f"policy file not found: {config.policy_path}", str(config.policy_path)
            ) from exc
        except FileFormatError as exc:
            raise SessionCreationError(f"policy invalid: {exc}", str(config.policy_path)) from exc
        try:
            self.templates: TemplateSet = load_templates(config.template_path)
        except FileNotFoundError as exc:
            raise SessionCreationError(
                f"template file not found: {config.template_path}", str(config.template_path)
            ) from exc
        except FileFormatError as exc:
            raise SessionCreationError(f"templates invalid: {exc}", str(config.template_path)) from exc

        self.clock = SimulatedClock(now_ms=0, per_agent_cost_ms=dict(config.per_agent_cost_ms))
        self.ep_state = EndpointerState(config=config.endpoint, speaker_id=config.speaker_id)
        self.state = DialogueState(max_repair_attempts=config.max_repair_attempts)
        self.consent = ConsentState()
        self.registry = ActionRegistry()
        self.registry.register(MediaAgent(config.playlist))
        self.registry.register(BrowserAgent(config.tabs))

        self.message_log: list[AgentMessage] = []
        self.audit_log: list[AuditEntry] = []
        self.retention_store: list[RetainedArtifact] = []
        self.traces: list[TraceRecord] = []
        self.outcomes: list[TurnOutcome] = []
        self.envelopes: list[dict[str, Any]] = []
        self.decisions_issued = 0
        self.escalations = 0
        self._message_counter = 0
        self._consent_counter = 0
        self._pending: _PendingDelivery | None = None

    # -- bus plumbing ------------------------------------------------------

    def _next_message_id(self, correlation_id: str) -> str:
        self._message_counter += 1
        return f"{correlation_id}-m{self._message_counter:04d}"

    def _envelope(self, kind: str, body: Mapping[str, Any]) -> None:
        self.envelopes.append({"kind": kind, "seq": len(self.envelopes) + 1, "body": dict(body)})

    def _emit(
        self,
        trace: TraceRecord,
        source: str,
        destination: str,
        kind_in: PayloadKind,
        kind_out: PayloadKind,
        summary: str,
        payload: Mapping[str, Any],
        cost_key: str | None = None,
    ) -> TraceRecord:
        self.clock = advance_clock_to(
            self.clock, self.clock.now_ms + self.clock.cost_of(cost_key or source)
        )
        message = AgentMessage(
            message_id=self._next_message_id(trace.correlation_id),
            correlation_id=trace.correlation_id,
            source_agent=source,
            destination_agent=destination,
            payload_kind=kind_out,
            payload=payload,
            logical_time_ms=self.clock.now_ms,
        )
        self.message_log.append(message)
        trace = append_step(
            trace,
            TraceStep(
                agent=source,
                kind_in=kind_in,
                kind_out=kind_out,
                summary=summary,
                logical_time_ms=self.clock.now_ms,
            ),
        )
        self._envelope("trace_step", {"correlation_id": trace.correlation_id, "step": trace.steps[-1].to_dict()})
        return trace

    def _audit(self, correlation_id: str, subject: str, decision: PolicyDecision | None, summary: str) -> None:
        self.decisions_issued += 1
        self.audit_log.append(
            AuditEntry(
                correlation_id=correlation_id,
                subject=subject,
                decision=decision,
                payload_summary=summary,
            )
        )

    # -- public surface ----------------------------------------------------

    def submit_events(self, events: Sequence[StreamEvent]) -> list[TurnOutcome]:
        """Feed timed events; returns the turns completed by this batch, in
        order. A pending delivery left over at batch end is finalized as
        delivered (end of input reads as unbroken silence). The whole batch is
        validated before anything is applied, so a rejected batch leaves the
        session untouched."""
        cursor = self.ep_state.stream_now_ms
        for event in events:
            if isinstance(event, TimedToken):
                if event.start_ms < cursor:
                    raise StreamOrderViolation(
                        f"token {event.surface!r} starts at {event.start_ms} but the "
                        f"stream is already at {cursor}"
                    )
                cursor = event.end_ms
            else:
                cursor += event.delta_ms
        finalized_before = len(self.outcomes)
        for event in events:
            if isinstance(event, TimedToken):
                self._resolve_pending(barge_in_at_ms=event.start_ms)
            self.ep_state, ep_events = ingest(self.ep_state, event)
            for ep_event in ep_events:
                if ep_event.kind is EndpointEventKind.TURN_COMPLETED:
                    assert ep_event.utterance is not None
                    self._run_pipeline(ep_event.utterance)
                    if isinstance(event, TimedToken):
                        # The token that closed this turn may itself barge in
                        # on the turn's scheduled delivery.
                        self._resolve_pending(barge_in_at_ms=event.start_ms)
        self._resolve_pending(barge_in_at_ms=None)
        return self.outcomes[finalized_before:]

    def update_consent(self, scope: str, action: str) -> int:
        """Record a consent grant/revocation; effective from the next turn.
        Returns that turn index."""
        known = {gov.SCOPE_STORE_AUDIO, gov.SCOPE_STORE_TRANSCRIPT} | {
            f"category:{c}" for c in self.registry.categories()
        }
        if scope not in known:
            raise InvalidScope(f"unknown consent scope {scope!r}")
        if action not in (CONSENT_GRANT, CONSENT_REVOKE):
            raise InvalidScope(f"consent action must be grant or revoke, got {action!r}")
        effective_from = len(self.traces) + 1
        granted = action == CONSENT_GRANT
        self.consent = self.consent.record(scope, granted, effective_from)
        self._consent_counter += 1
        correlation_id = f"consent-{self._consent_counter:04d}"
        self._message_counter += 1
        self.message_log.append(
            AgentMessage(
                message_id=f"{correlation_id}-m{self._message_counter:04d}",
                correlation_id=correlation_id,
                source_agent="gateway",
                destination_agent=GOVERNANCE,
                payload_kind=PayloadKind.POLICY_QUERY,
                payload={"scope": scope, "action": action, "effective_from_turn": effective_from},
                logical_time_ms=self.clock.now_ms,
            )
        )
        self._audit(
            correlation_id,
            "consent",
            None,
            f"{action} {scope} effective from turn {effective_from}",
        )
        self._envelope(
            "consent_ack",
            {"scope": scope, "action": action, "effective_from_turn": effective_from},
        )
        return effective_from

    def get_trace(self, turn_index: int) -> TraceRecord:
        """Turn indexes are 1-based, matching Utterance.turn_index."""
        if not (1 <= turn_index <= len(self.traces)):
            raise NotFound(f"no trace for turn {turn_index} (have {len(self.traces)})")
        return self.traces[turn_index - 1]

    def consent_scopes(self) -> list[str]:
        return sorted(
            {gov.SCOPE_STORE_AUDIO, gov.SCOPE_STORE_TRANSCRIPT}
            | {f"category:{c}" for c in self.registry.categories()}
        )

    def state_snapshot(self) -> dict[str, Any]:
        return {
            "dialogue": self.state.snapshot(),
            "consent": [
                {"scope": e.scope, "granted": e.granted, "turn_index": e.turn_index}
                for e in self.consent.events
            ],
            "turns_completed": len(self.traces),
            "clock_ms": self.clock.now_ms,
            "retained_artifacts": len(self.retention_store),
        }

    def live_metrics(self) -> dict[str, Any]:
        total = len(self.outcomes)
        conforming = sum(
            1
            for o in self.outcomes
            if self.config.latency_floor_ms <= o.response_gap_ms <= self.config.latency_ceiling_ms
        )
        breakdowns = sum(1 for o in self.outcomes if o.repair_reason is not None)
        compliant = self._count_compliant_retention()
        return {
            "turns": total,
            "breakdowns": breakdowns,
            "escalations": self.escalations,
            "latency_conformance": {
                "conforming": conforming,
                "total": total,
                "value": (conforming / total) if total else None,
            },
            "consent_compliance": {
                "compliant": compliant,
                "retained": len(self.retention_store),
                "value": (compliant / len(self.retention_store)) if self.retention_store else 1.0,
            },
        }

    def _count_compliant_retention(self) -> int:
        compliant = 0
        for artifact in self.retention_store:
            scope = gov.SCOPE_STORE_AUDIO if artifact.artifact_kind == "audio" else gov.SCOPE_STORE_TRANSCRIPT
            if (
                self.consent.effective(scope, artifact.turn_index)
                and self.policy.retention_default != gov.RETENTION_NEVER
            ):
                compliant += 1
        return compliant

    # -- the turn pipeline -------------------------------------------------

    def _run_pipeline(self, utterance: Utterance) -> None:
        turn_index = utterance.turn_index
        correlation_id = f"turn-{turn_index:04d}"
        trace = TraceRecord(correlation_id=correlation_id)
        self.clock = advance_clock_to(self.clock, utterance.completed_ms)
        gap_ms = 0

        def cost(agent: str) -> int:
            return self.clock.cost_of(agent)

        # 1. speech interface hands the segmented utterance to understanding
        gap_ms += cost(SPEECH)
        trace = self._emit(
            trace,
            SPEECH,
            UNDERSTANDING,
            PayloadKind.UTTERANCE,
            PayloadKind.UTTERANCE,
            f"turn {turn_index}: segmented {len(utterance.tokens)} tokens "
            f"[{utterance.started_ms}..{utterance.completed_ms}ms]",
            utterance.to_dict(),
        )

        # 2. understanding
        frame = parse_intent(utterance, self.lexicon)
        gap_ms += cost(UNDERSTANDING)
        trace = self._emit(
            trace,
            UNDERSTANDING,
            CONVERSATION_STATE,
            PayloadKind.UTTERANCE,
            PayloadKind.INTENT_FRAME,
            frame.summary(),
            {
                "intent": frame.intent,
                "polarity": frame.polarity,
                "confidence": round(frame.confidence, 4),
                "language_mix": round(frame.language_mix, 4),
                "slots": dict(frame.slots),
            },
        )

        # 3. conversation state resolves against focus
        resolved = resolve(self.state, frame)
        result: ActionResult | None = None
        decision: PolicyDecision | None = None
        trigger: Any

        if isinstance(resolved, RepairRequest):
            gap_ms += cost(CONVERSATION_STATE)
            trace = self._emit(
                trace,
                CONVERSATION_STATE,
                RESPONSE,
                PayloadKind.INTENT_FRAME,
                PayloadKind.REPAIR_REQUEST,
                f"repair needed: {resolved.reason}",
                {"reason": resolved.reason},
            )
            trigger = resolved
        else:
            category = self.registry.category_for(resolved.intent)
            if resolved.intent in ACK_INTENTS or category is None:
                gap_ms += cost(CONVERSATION_STATE)
                trace = self._emit(
                    trace,
                    CONVERSATION_STATE,
                    RESPONSE,
                    PayloadKind.INTENT_FRAME,
                    PayloadKind.RESOLVED_INTENT,
                    resolved.resolution_notes,
                    {"intent": resolved.intent, "slots": dict(resolved.slots)},
                )
                if resolved.intent in ACK_INTENTS:
                    trigger = resolved
                else:
                    # An action intent nobody claims: surface as failure.
                    result = ActionResult("failure", f"no agent handles {resolved.intent}")
                    trigger = result
            else:
                gap_ms += cost(CONVERSATION_STATE)
                trace = self._emit(
                    trace,
                    CONVERSATION_STATE,
                    GOVERNANCE,
                    PayloadKind.INTENT_FRAME,
                    PayloadKind.POLICY_QUERY,
                    resolved.resolution_notes,
                    {"intent": resolved.intent, "category": category, "slots": dict(resolved.slots)},
                )
                decision = evaluate_action(
                    self.policy,
                    self.consent,
                    resolved.intent,
                    category,
                    turn_index,
                    self.clock.now_ms + cost(GOVERNANCE),
                )
                self._audit(correlation_id, "action", decision, decision.rationale)
                if decision.verdict == ALLOW:
                    agent = self.registry.agent_for(resolved.intent)
                    assert agent is not None
                    gap_ms += cost(GOVERNANCE)
                    trace = self._emit(
                        trace,
                        GOVERNANCE,
                        agent.descriptor.agent_name,
                        PayloadKind.POLICY_QUERY,
                        PayloadKind.POLICY_DECISION,
                        decision.rationale,
                        {"verdict": decision.verdict, "rule_id": decision.rule_id, "category": decision.category},
                    )
                    result = dispatch(self.registry, resolved, decision)
                    gap_ms += cost(agent.descriptor.agent_name)
                    trace = self._emit(
                        trace,
                        agent.descriptor.agent_name,
                        RESPONSE,
                        PayloadKind.POLICY_DECISION,
                        PayloadKind.ACTION_RESULT,
                        result.effects,
                        result.to_dict(),
                    )
                    trigger = result
                else:
                    gap_ms += cost(GOVERNANCE)
                    trace = self._emit(
                        trace,
                        GOVERNANCE,
                        RESPONSE,
                        PayloadKind.POLICY_QUERY,
                        PayloadKind.POLICY_DECISION,
                        decision.rationale,
                        {"verdict": decision.verdict, "rule_id": decision.rule_id, "category": decision.category},
                    )
                    trigger = decision

        # 4. commit the turn to dialogue memory
        commit = commit_turn(self.state, frame, resolved, result, turn_index)
        self.state = commit.state
        if commit.escalated:
            self.escalations += 1

        # 5. response planning
        plan = plan_response(self.state, trigger, self.templates)
        trigger_kind = {
            ActionResult: PayloadKind.ACTION_RESULT,
            PolicyDecision: PayloadKind.POLICY_DECISION,
            RepairRequest: PayloadKind.REPAIR_REQUEST,
            ResolvedIntent: PayloadKind.RESOLVED_INTENT,
        }[type(trigger)]
        gap_ms += cost(RESPONSE)
        trace = self._emit(
            trace,
            RESPONSE,
            GOVERNANCE,
            trigger_kind,
            PayloadKind.RESPONSE_PLAN,
            f"plan {plan.kind} template={plan.template_id}"
            + (" (escalated: repair budget exhausted)" if commit.escalated else ""),
            {"kind": plan.kind, "template_id": plan.template_id, "fills": dict(plan.fills)},
        )

        # 6. response gate
        response_decision = evaluate_response(
            self.policy, plan.kind, self.clock.now_ms + cost(GOVERNANCE)
        )
        self._audit(correlation_id, "response", response_decision, response_decision.rationale)
        gap_ms += cost(GOVERNANCE)
        trace = self._emit(
            trace,
            GOVERNANCE,
            SPEECH,
            PayloadKind.RESPONSE_PLAN,
            PayloadKind.POLICY_DECISION,
            response_decision.rationale,
            {"verdict": response_decision.verdict, "rule_id": response_decision.rule_id},
        )
        withheld = response_decision.verdict != ALLOW
        text = WITHHELD_MARKER if withheld else render(plan, self.templates)

        # 7. retention decisions for this turn's artifacts
        for artifact_kind, content in (
            ("audio", [t.to_dict() for t in utterance.tokens]),
            ("transcript", utterance.text),
        ):
            retention = decide_retention(self.policy, self.consent, artifact_kind, turn_index)
            self._audit(
                correlation_id,
                "retention",
                None,
                f"{retention} {artifact_kind} turn={turn_index} "
                f"(policy retention={self.policy.retention_default})",
            )
            if retention != gov.DISCARD:
                self.retention_store.append(
                    RetainedArtifact(
                        turn_index=turn_index,
                        artifact_kind=artifact_kind,
                        content=content,
                        retention=retention,
                    )
                )

        # 8. schedule delivery; a later token may still cancel it
        gap_ms += cost(SPEECH)
        outcome_base = {
            "turn_index": turn_index,
            "utterance_text": utterance.text,
            "intent": frame.intent,
            "polarity": frame.polarity,
            "resolved_intent": resolved.intent if isinstance(resolved, ResolvedIntent) else None,
            "repair_reason": resolved.reason if isinstance(resolved, RepairRequest) else None,
            "escalated": commit.escalated,
            "actions": (result,) if result is not None else (),
            "response_kind": plan.kind,
            "response_gap_ms": gap_ms,
        }
        self._pending = _PendingDelivery(
            deliver_at_ms=self.clock.now_ms + cost(SPEECH),
            text=text,
            withheld=withheld,
            outcome_base=outcome_base,
            trace=trace,
            correlation_id=correlation_id,
        )

    def _resolve_pending(self, barge_in_at_ms: int | None) -> None:
        pending = self._pending
        if pending is None:
            return
        cancelled = barge_in_at_ms is not None and barge_in_at_ms < pending.deliver_at_ms
        self._pending = None
        self.clock = advance_clock_to(self.clock, pending.deliver_at_ms)
        if cancelled:
            at_ms = max(barge_in_at_ms, pending.trace.steps[-1].logical_time_ms)
            summary = f"delivery cancelled: barge-in at {barge_in_at_ms}ms"
        elif pending.withheld:
            # Not a response: governance vetoed the plan and only the
            # non-linguistic status marker closes the turn (auditors must be
            # able to tell this apart from a gated delivery).
            at_ms = pending.deliver_at_ms
            summary = f"response withheld: status marker {pending.text}"
        else:
            at_ms = pending.deliver_at_ms
            summary = f"delivered: {pending.text}"
        message = AgentMessage(
            message_id=self._next_message_id(pending.correlation_id),
            correlation_id=pending.correlation_id,
            source_agent=SPEECH,
            destination_agent=USER,
            payload_kind=PayloadKind.RESPONSE_DELIVERY,
            payload={"text": None if cancelled else pending.text, "cancelled": cancelled},
            logical_time_ms=at_ms,
        )
        self.message_log.append(message)
        trace = append_step(
            pending.trace,
            TraceStep(
                agent=SPEECH,
                kind_in=PayloadKind.POLICY_DECISION,
                kind_out=PayloadKind.RESPONSE_DELIVERY,
                summary=summary,
                logical_time_ms=at_ms,
            ),
        )
        self._envelope(
            "trace_step", {"correlation_id": pending.correlation_id, "step": trace.steps[-1].to_dict()}
        )
        outcome = TurnOutcome(
            correlation_id=pending.correlation_id,
            delivered=None if cancelled else pending.text,
            cancelled=cancelled,
            trace=trace,
            **pending.outcome_base,
        )
        self.traces.append(trace)
        self.outcomes.append(outcome)
        self._envelope("turn_outcome", outcome.to_dict())
        self._envelope("metrics", self.live_metrics())


def create_session(config: SessionConfig) -> Session:
    return Session(config)


def serialize_traces(traces: Iterable[TraceRecord]) -> str:
    """Canonical one-trace-per-line serialization used for golden files."""
    return "".join(canonical_json(t.to_dict()) + "\n" for t in traces)
