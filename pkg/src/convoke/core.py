"""Shared domain types: timed tokens, utterances, the agent message envelope,
the per-turn trace log, and the simulated clock.

Everything here is an immutable value; "mutation" returns a new value. That is
what makes session replay byte-for-byte reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

from .errors import InvalidArgument, StreamOrderViolation, TraceOrderViolation

LANGUAGE_TAGS = ("gn", "es", "mixed", "unknown")

# Agent names used in messages, traces, and the per-agent cost table.
SPEECH = "speech_interface"
UNDERSTANDING = "understanding"
CONVERSATION_STATE = "conversation_state"
GOVERNANCE = "governance"
RESPONSE = "response"
MEDIA = "media"
BROWSER = "browser"
USER = "user"

AGENT_NAMES = (SPEECH, UNDERSTANDING, CONVERSATION_STATE, GOVERNANCE, RESPONSE, MEDIA, BROWSER)


class PayloadKind(str, Enum):
    UTTERANCE = "utterance"
    INTENT_FRAME = "intent_frame"
    RESOLVED_INTENT = "resolved_intent"
    POLICY_QUERY = "policy_query"
    POLICY_DECISION = "policy_decision"
    ACTION_REQUEST = "action_request"
    ACTION_RESULT = "action_result"
    RESPONSE_PLAN = "response_plan"
    RESPONSE_DELIVERY = "response_delivery"
    # Carries a clarification request from the state agent to the response
    # agent on turns that resolve to repair instead of an intent.
    REPAIR_REQUEST = "repair_request"


@dataclass(frozen=True)
class TimedToken:
    """One recognized surface form with its time interval, in stream ms."""

    surface: str
    start_ms: int
    end_ms: int
    language_tag: str = "unknown"

    def __post_init__(self) -> None:
        if not self.surface.strip():
            raise InvalidArgument("token surface is empty")
        if any(ch.isspace() for ch in self.surface.strip()):
            raise InvalidArgument(f"token surface contains whitespace: {self.surface!r}")
        if self.start_ms < 0:
            raise InvalidArgument(f"token start_ms must be >= 0, got {self.start_ms}")
        if self.end_ms <= self.start_ms:
            raise InvalidArgument(
                f"token interval is empty or inverted: [{self.start_ms}, {self.end_ms}]"
            )
        if self.language_tag not in LANGUAGE_TAGS:
            raise InvalidArgument(f"unknown language_tag: {self.language_tag!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "surface": self.surface,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "language_tag": self.language_tag,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TimedToken":
        return cls(
            surface=str(data["surface"]),
            start_ms=int(data["start_ms"]),
            end_ms=int(data["end_ms"]),
            language_tag=str(data.get("language_tag", "unknown")),
        )


@dataclass(frozen=True)
class Utterance:
    """A completed turn's worth of tokens, as segmented by the endpointer."""

    tokens: tuple[TimedToken, ...]
    speaker_id: str
    turn_index: int
    started_ms: int
    completed_ms: int

    def __post_init__(self) -> None:
        if not self.tokens:
            raise InvalidArgument("utterance must contain at least one token")
        if self.turn_index < 0:
            raise InvalidArgument("turn_index must be non-negative")
        prev_end = -1
        for tok in self.tokens:
            if tok.start_ms < prev_end:
                raise StreamOrderViolation(
                    f"token {tok.surface!r} starts at {tok.start_ms} before previous end {prev_end}"
                )
            prev_end = tok.end_ms
        if self.completed_ms < self.tokens[-1].end_ms:
            raise InvalidArgument("completed_ms precedes the last token's end")

    @property
    def text(self) -> str:
        return " ".join(t.surface for t in self.tokens)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tokens": [t.to_dict() for t in self.tokens],
            "speaker_id": self.speaker_id,
            "turn_index": self.turn_index,
            "started_ms": self.started_ms,
            "completed_ms": self.completed_ms,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Utterance":
        return cls(
            tokens=tuple(TimedToken.from_dict(t) for t in data["tokens"]),
            speaker_id=str(data["speaker_id"]),
            turn_index=int(data["turn_index"]),
            started_ms=int(data["started_ms"]),
            completed_ms=int(data["completed_ms"]),
        )


@dataclass(frozen=True)
class AgentMessage:
    """One hop on the session bus. The payload is a plain dict snapshot of the
    typed value, so the message log can be serialized as-is."""

    message_id: str
    correlation_id: str
    source_agent: str
    destination_agent: str
    payload_kind: PayloadKind
    payload: Mapping[str, Any]
    logical_time_ms: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "message_id": self.message_id,
            "correlation_id": self.correlation_id,
            "source_agent": self.source_agent,
            "destination_agent": self.destination_agent,
            "payload_kind": self.payload_kind.value,
            "payload": dict(self.payload),
            "logical_time_ms": self.logical_time_ms,
        }


@dataclass(frozen=True)
class TraceStep:
    agent: str
    kind_in: PayloadKind
    kind_out: PayloadKind
    summary: str
    logical_time_ms: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent": self.agent,
            "in": self.kind_in.value,
            "out": self.kind_out.value,
            "summary": self.summary,
            "t_ms": self.logical_time_ms,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TraceStep":
        return cls(
            agent=str(data["agent"]),
            kind_in=PayloadKind(data["in"]),
            kind_out=PayloadKind(data["out"]),
            summary=str(data["summary"]),
            logical_time_ms=int(data["t_ms"]),
        )


@dataclass(frozen=True)
class TraceRecord:
    """Append-only record of every agent hop in one turn."""

    correlation_id: str
    steps: tuple[TraceStep, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "correlation_id": self.correlation_id,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TraceRecord":
        return cls(
            correlation_id=str(data["correlation_id"]),
            steps=tuple(TraceStep.from_dict(s) for s in data["steps"]),
        )


def append_step(trace: TraceRecord, step: TraceStep) -> TraceRecord:
    """Append one step; equal timestamps are legal, regressions are not."""
    if trace.steps and step.logical_time_ms < trace.steps[-1].logical_time_ms:
        raise TraceOrderViolation(
            f"step at t={step.logical_time_ms} regresses behind t={trace.steps[-1].logical_time_ms}"
        )
    return replace(trace, steps=trace.steps + (step,))


@dataclass(frozen=True)
class SimulatedClock:
    """Logical session time. Costs are looked up per agent name; agents absent
    from the table cost 0 ms, so timing stays inert unless configured."""

    now_ms: int = 0
    per_agent_cost_ms: Mapping[str, int] = field(default_factory=dict)

    def cost_of(self, agent: str) -> int:
        return int(self.per_agent_cost_ms.get(agent, 0))


def advance_clock(clock: SimulatedClock, delta_ms: int) -> SimulatedClock:
    if delta_ms < 0:
        raise InvalidArgument(f"clock may not move backwards (delta={delta_ms})")
    return replace(clock, now_ms=clock.now_ms + delta_ms)


def advance_clock_to(clock: SimulatedClock, target_ms: int) -> SimulatedClock:
    """Advance to an absolute time; a target in the past is a no-op."""
    if target_ms <= clock.now_ms:
        return clock
    return replace(clock, now_ms=target_ms)


def canonical_json(value: Any) -> str:
    """The one canonical byte encoding used for golden traces and the wire."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def pretty_json(value: Any) -> str:
    """Stable human-readable rendering (still deterministic)."""
    return json.dumps(value, sort_keys=True, indent=2, ensure_ascii=False)
