from __future__ import annotations

import json
import re

import pytest

from convoke import data_path
from convoke.core import TimedToken
from convoke.endpointing import SilenceAdvance
from convoke.errors import InvalidScope, NotFound, SessionCreationError, StreamOrderViolation
from convoke.evaluation import find_gate_violations
from convoke.orchestrator import Session, SessionConfig, serialize_traces

from conftest import utterance_events

# Step sequences per turn, as agent names: the action pair is optional and
# the governance deny step may appear without a following action step.
_FULL_TURN = re.compile(
    r"^speech_interface understanding conversation_state"
    r"( governance( (media|browser))?)?"
    r" response governance speech_interface$"
)


def agent_sequence(trace) -> str:
    return " ".join(step.agent for step in trace.steps)


def config_with(base_dir, **overrides) -> SessionConfig:
    data = json.loads(data_path("session.json").read_text(encoding="utf-8"))
    data.update(overrides)
    return SessionConfig.from_dict(data, base_dir=data_path())


class TestSessionCreation:
    def test_valid_config(self, session):
        assert session.state.history == ()
        assert session.clock.now_ms == 0

    def test_missing_lexicon_names_file(self, tmp_path):
        config = SessionConfig(
            lexicon_path=tmp_path / "missing.txt",
            policy_path=data_path("policy.community.txt"),
            template_path=data_path("templates.gn.txt"),
        )
        with pytest.raises(SessionCreationError) as err:
            Session(config)
        assert "missing.txt" in str(err.value)

    def test_inverted_latency_window_rejected(self):
        with pytest.raises(SessionCreationError):
            SessionConfig(
                lexicon_path=data_path("lexicon.gn.txt"),
                policy_path=data_path("policy.community.txt"),
                template_path=data_path("templates.gn.txt"),
                latency_floor_ms=100,
                latency_ceiling_ms=100,
            )


class TestPipeline:
    def test_table_turn_one(self, session):
        outcomes = session.submit_events(utterance_events("Che ahenduse purahéi"))
        assert len(outcomes) == 1
        outcome = outcomes[0]
        assert outcome.intent == "PLAY_MUSIC"
        assert outcome.delivered == "Oĩ porã"
        assert outcome.actions[0].status == "success"
        assert agent_sequence(outcome.trace) == (
            "speech_interface understanding conversation_state governance media "
            "response governance speech_interface"
        )

    def test_table_turn_two_executes_next_track(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        outcomes = session.submit_events(utterance_events("Nda che gustái", start_ms=5000))
        outcome = outcomes[0]
        assert outcome.intent == "REJECTION"
        assert outcome.resolved_intent == "SKIP"
        assert any("NEXT_TRACK" in step.summary for step in outcome.trace.steps)

    def test_empty_event_list(self, session):
        assert session.submit_events([]) == []

    def test_repair_turn_has_no_action_steps(self, session):
        outcomes = session.submit_events(utterance_events("zzz qqq"))
        outcome = outcomes[0]
        assert outcome.repair_reason == "intent-unknown"
        assert outcome.response_kind == "repair_prompt"
        assert "governance media" not in agent_sequence(outcome.trace)
        assert outcome.actions == ()

    def test_every_trace_matches_pipeline_pattern(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        session.submit_events(utterance_events("zzz", start_ms=5000))
        session.submit_events(utterance_events("Nda che gustái", start_ms=10000))
        session.submit_events(utterance_events("Oĩ porã", start_ms=15000))
        for trace in session.traces:
            assert _FULL_TURN.match(agent_sequence(trace)), agent_sequence(trace)

    def test_gate_soundness_on_traces(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        session.submit_events(utterance_events("Nda che gustái", start_ms=5000))
        for trace in session.traces:
            assert find_gate_violations(trace) == []

    def test_stream_order_violation_propagates(self, session):
        events = [TimedToken("a", 1000, 1300), TimedToken("b", 0, 300)]
        with pytest.raises(StreamOrderViolation):
            session.submit_events(events)

    def test_rejected_batch_leaves_session_intact(self, session):
        with pytest.raises(StreamOrderViolation):
            session.submit_events([TimedToken("a", 1000, 1300), TimedToken("b", 0, 300)])
        outcomes = session.submit_events(utterance_events("Che ahenduse purahéi"))
        assert outcomes[0].intent == "PLAY_MUSIC"

    def test_vetoed_response_closes_turn_with_marker(self, tmp_path):
        from convoke.response import WITHHELD_MARKER

        policy = tmp_path / "mute.txt"
        policy.write_text(
            "[action_rules]\nallow_music category=music verdict=allow\n"
            "[response_rules]\nmute kind=confirmation verdict=deny\n",
            encoding="utf-8",
        )
        session = Session(config_with(None, policy_path=str(policy)))
        outcome = session.submit_events(utterance_events("Che ahenduse purahéi"))[0]
        assert outcome.delivered == WITHHELD_MARKER
        assert outcome.actions[0].status == "success"
        assert "response withheld" in outcome.trace.steps[-1].summary
        assert find_gate_violations(outcome.trace) == []


class TestMessages:
    def test_message_chain_sources_received_earlier(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        by_corr: dict[str, list] = {}
        for message in session.message_log:
            by_corr.setdefault(message.correlation_id, []).append(message)
        for correlation, messages in by_corr.items():
            receivers = {messages[0].source_agent}
            for message in messages:
                assert message.source_agent in receivers, (
                    f"{correlation}: {message.source_agent} spoke before hearing anything"
                )
                receivers.add(message.destination_agent)

    def test_trace_steps_match_messages_one_to_one(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        session.submit_events(utterance_events("zzz", start_ms=5000))
        for trace in session.traces:
            turn_messages = [
                m for m in session.message_log if m.correlation_id == trace.correlation_id
            ]
            assert len(turn_messages) == len(trace.steps)
            for message, step in zip(turn_messages, trace.steps):
                assert message.payload_kind == step.kind_out
                assert message.logical_time_ms == step.logical_time_ms

    def test_message_times_non_decreasing(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        times = [m.logical_time_ms for m in session.message_log]
        assert times == sorted(times)


class TestLatency:
    COSTS = {
        "speech_interface": 10,
        "understanding": 20,
        "conversation_state": 15,
        "governance": 5,
        "media": 10,
        "response": 10,
    }

    def make_session(self):
        return Session(config_with(None, per_agent_cost_ms=self.COSTS))

    def test_gap_equals_sum_of_traversed_costs(self):
        session = self.make_session()
        outcomes = session.submit_events(utterance_events("Che ahenduse purahéi"))
        outcome = outcomes[0]
        expected = sum(self.COSTS.get(step.agent, 0) for step in outcome.trace.steps)
        assert outcome.response_gap_ms == expected == 85

    def test_gap_on_repair_turn(self):
        session = self.make_session()
        outcomes = session.submit_events(utterance_events("zzz"))
        outcome = outcomes[0]
        expected = sum(self.COSTS.get(step.agent, 0) for step in outcome.trace.steps)
        assert outcome.response_gap_ms == expected

    def test_zero_cost_default_keeps_gap_zero(self, session):
        outcomes = session.submit_events(utterance_events("Che ahenduse purahéi"))
        assert outcomes[0].response_gap_ms == 0

    def test_delivery_time_offsets_from_turn_completion(self):
        session = self.make_session()
        outcomes = session.submit_events(utterance_events("Che ahenduse purahéi"))
        trace = outcomes[0].trace
        completed = 1100 + 1200  # last token end + end-of-turn gap
        assert trace.steps[0].logical_time_ms == completed + 10
        assert trace.steps[-1].logical_time_ms == completed + 85


class TestBargeIn:
    def test_token_before_scheduled_delivery_cancels_it(self):
        session = Session(config_with(None, per_agent_cost_ms={"response": 500}))
        events = [
            *utterance_events("Che ahenduse purahéi"),
            # Turn completes at 2300; delivery scheduled at 2800. Speaking
            # again at 2400 interrupts it.
            TimedToken("Nda", 2400, 2700),
            TimedToken("che", 2800, 3100),
            TimedToken("gustái", 3200, 3500),
            SilenceAdvance(1200),
        ]
        outcomes = session.submit_events(events)
        assert len(outcomes) == 2
        first, second = outcomes
        assert first.cancelled
        assert first.delivered is None
        assert "barge-in" in first.trace.steps[-1].summary
        assert not second.cancelled
        assert second.delivered == "Oĩ porã"  # SKIP confirmation

    def test_token_after_scheduled_delivery_does_not_cancel(self, session):
        events = [
            *utterance_events("Che ahenduse purahéi"),
            TimedToken("Nda", 2400, 2700),
            TimedToken("che", 2800, 3100),
            TimedToken("gustái", 3200, 3500),
            SilenceAdvance(1200),
        ]
        outcomes = session.submit_events(events)
        assert [o.cancelled for o in outcomes] == [False, False]


class TestConsent:
    def test_unknown_scope_rejected(self, session):
        with pytest.raises(InvalidScope):
            session.update_consent("telemetry_x", "grant")

    def test_revoking_never_granted_scope_still_audited(self, session):
        before = len(session.audit_log)
        session.update_consent("store_audio", "revoke")
        assert len(session.audit_log) == before + 1
        assert not session.consent.effective("store_audio", 99)

    def test_consent_effective_next_turn(self):
        session = Session(config_with(None, policy_path="policy.retention_session.txt"))
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        effective_from = session.update_consent("store_audio", "grant")
        assert effective_from == 2
        session.submit_events(utterance_events("Nda che gustái", start_ms=5000))
        kinds = [(a.turn_index, a.artifact_kind) for a in session.retention_store]
        assert kinds == [(2, "audio")]

    def test_ask_policy_consent_toggle_changes_decision(self):
        session = Session(config_with(None, policy_path="policy.ask_music.txt"))
        first = session.submit_events(utterance_events("Che ahenduse purahéi"))[0]
        assert first.response_kind == "consent_prompt"
        assert first.actions == ()
        session.update_consent("category:music", "grant")
        second = session.submit_events(utterance_events("Che ahenduse purahéi", start_ms=5000))[0]
        assert second.actions and second.actions[0].status == "success"
        assert any("via consent" in step.summary for step in second.trace.steps)


class TestTraceAccess:
    def test_get_trace_is_one_based(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        trace = session.get_trace(1)
        assert trace.correlation_id == "turn-0001"

    def test_unknown_turn_not_found(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        with pytest.raises(NotFound):
            session.get_trace(99)


class TestDeterminism:
    def test_two_runs_serialize_identically(self, base_config_dict):
        def run() -> tuple[str, list[dict]]:
            config = SessionConfig.from_dict(base_config_dict, base_dir=data_path())
            session = Session(config)
            session.submit_events(utterance_events("Che ahenduse purahéi"))
            session.update_consent("store_audio", "grant")
            session.submit_events(utterance_events("Nda che gustái", start_ms=5000))
            session.submit_events(utterance_events("zzz qqq", start_ms=10000))
            return serialize_traces(session.traces), [o.to_dict() for o in session.outcomes]

        assert run() == run()

    def test_audit_count_matches_decisions_issued(self, session):
        session.submit_events(utterance_events("Che ahenduse purahéi"))
        session.update_consent("store_audio", "grant")
        session.submit_events(utterance_events("Nda che gustái", start_ms=5000))
        assert len(session.audit_log) == session.decisions_issued
        # per action turn: 1 action + 1 response + 2 retention = 4; +1 consent
        assert len(session.audit_log) == 9
