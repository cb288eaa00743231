from __future__ import annotations

import pytest

from convoke.core import (
    PayloadKind,
    SimulatedClock,
    TimedToken,
    TraceRecord,
    TraceStep,
    Utterance,
    advance_clock,
    append_step,
    canonical_json,
)
from convoke.errors import InvalidArgument, StreamOrderViolation, TraceOrderViolation


def step(t: int, agent: str = "understanding") -> TraceStep:
    return TraceStep(
        agent=agent,
        kind_in=PayloadKind.UTTERANCE,
        kind_out=PayloadKind.INTENT_FRAME,
        summary="x",
        logical_time_ms=t,
    )


class TestClock:
    def test_zero_delta_is_identity(self):
        clock = SimulatedClock(now_ms=0)
        assert advance_clock(clock, 0).now_ms == 0

    def test_advance_adds_exactly(self):
        clock = SimulatedClock(now_ms=100)
        assert advance_clock(clock, 250).now_ms == 350

    def test_negative_delta_rejected(self):
        clock = SimulatedClock(now_ms=350)
        with pytest.raises(InvalidArgument):
            advance_clock(clock, -1)

    def test_unknown_agent_costs_nothing(self):
        clock = SimulatedClock(per_agent_cost_ms={"media": 10})
        assert clock.cost_of("media") == 10
        assert clock.cost_of("browser") == 0


class TestTrace:
    def test_append_to_empty(self):
        trace = append_step(TraceRecord("turn-0001"), step(0))
        assert len(trace.steps) == 1

    def test_equal_time_allowed(self):
        trace = append_step(TraceRecord("turn-0001"), step(50))
        trace = append_step(trace, step(50))
        assert len(trace.steps) == 2

    def test_time_regression_rejected(self):
        trace = append_step(TraceRecord("turn-0001"), step(50))
        with pytest.raises(TraceOrderViolation):
            append_step(trace, step(40))

    def test_append_leaves_earlier_steps_unmodified(self):
        trace = append_step(TraceRecord("turn-0001"), step(10))
        before = trace.steps
        append_step(trace, step(20))
        assert trace.steps == before


class TestTokens:
    def test_empty_interval_rejected(self):
        with pytest.raises(InvalidArgument):
            TimedToken("che", 100, 100)

    def test_blank_surface_rejected(self):
        with pytest.raises(InvalidArgument):
            TimedToken("  ", 0, 100)

    def test_utterance_rejects_overlap(self):
        with pytest.raises(StreamOrderViolation):
            Utterance(
                tokens=(TimedToken("a", 0, 200), TimedToken("b", 150, 300)),
                speaker_id="user",
                turn_index=1,
                started_ms=0,
                completed_ms=1500,
            )

    def test_utterance_requires_tokens(self):
        with pytest.raises(InvalidArgument):
            Utterance(tokens=(), speaker_id="user", turn_index=1, started_ms=0, completed_ms=0)

    def test_roundtrip(self):
        token = TimedToken("purahéi", 0, 300, "gn")
        assert TimedToken.from_dict(token.to_dict()) == token


def test_canonical_json_is_sorted_and_compact():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'


def test_canonical_json_keeps_utf8():
    assert canonical_json({"t": "Oĩ porã"}) == '{"t":"Oĩ porã"}'
