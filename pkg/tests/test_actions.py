from __future__ import annotations

import itertools
import random

import pytest

from convoke.actions import (
    ActionRegistry,
    ActionResult,
    BrowserAgent,
    BrowserState,
    MediaAgent,
    MediaState,
    dispatch,
)
from convoke.core import TimedToken, Utterance
from convoke.dialogue import ResolvedIntent
from convoke.errors import GateViolation, InvalidArgument, RegistrationConflict
from convoke.governance import PolicyDecision
from convoke.understanding import IntentFrame


def resolved(intent: str, slots: dict | None = None) -> ResolvedIntent:
    f = IntentFrame(
        intent=intent,
        slots={},
        polarity="neutral",
        confidence=1.0,
        language_mix=0.0,
        source_utterance=Utterance((TimedToken("x", 0, 100),), "user", 1, 0, 1300),
    )
    return ResolvedIntent(intent=intent, slots=slots or {}, resolution_notes="t", origin_frame=f)


def allow(category: str) -> PolicyDecision:
    return PolicyDecision("allow", "r", f"allow action category={category}", 0, category)


class TestRegistry:
    def test_register_media(self):
        registry = ActionRegistry()
        registry.register(MediaAgent(["t1"]))
        assert registry.category_for("PLAY_MUSIC") == "music"

    def test_disjoint_agents_coexist(self):
        registry = ActionRegistry()
        registry.register(MediaAgent(["t1"]))
        registry.register(BrowserAgent())
        assert registry.categories() == ("browser", "music")

    def test_conflicting_claim_rejected(self):
        registry = ActionRegistry()
        registry.register(MediaAgent(["t1"]))
        with pytest.raises(RegistrationConflict):
            registry.register(MediaAgent(["t2"]))

    def test_unknown_intent_resolves_to_no_agent(self):
        registry = ActionRegistry()
        registry.register(MediaAgent(["t1"]))
        assert registry.agent_for("UNKNOWN") is None


class TestMediaMachine:
    def test_play_from_stopped_starts_at_head(self):
        agent = MediaAgent(["t1", "t2", "t3"])
        result = agent.handle(resolved("PLAY_MUSIC"))
        assert result.status == "success"
        assert agent.state.status == "playing"
        assert agent.state.current_index == 0
        assert result.updated_entities[0].entity_id == "t1"

    def test_skip_advances(self):
        agent = MediaAgent(["t1", "t2", "t3"])
        agent.handle(resolved("PLAY_MUSIC"))
        result = agent.handle(resolved("SKIP"))
        assert agent.state.current_index == 1
        assert "NEXT_TRACK" in result.effects

    def test_skip_wraps_past_last_track(self):
        agent = MediaAgent(["t1", "t2", "t3"])
        agent.handle(resolved("PLAY_MUSIC"))
        agent.handle(resolved("SKIP"))
        agent.handle(resolved("SKIP"))
        result = agent.handle(resolved("SKIP"))
        assert agent.state.current_index == 0
        assert result.updated_entities[0].entity_id == "t1"

    def test_skip_while_stopped_fails(self):
        agent = MediaAgent(["t1"])
        assert agent.handle(resolved("SKIP")).status == "failure"

    def test_stop_requires_playing(self):
        agent = MediaAgent(["t1"])
        assert agent.handle(resolved("STOP_MUSIC")).status == "failure"
        agent.handle(resolved("PLAY_MUSIC"))
        assert agent.handle(resolved("STOP_MUSIC")).status == "success"
        assert agent.state.status == "stopped"

    def test_play_on_empty_playlist_fails(self):
        agent = MediaAgent([])
        assert agent.handle(resolved("PLAY_MUSIC")).status == "failure"

    def test_state_machine_closure_exhaustive(self):
        """Every reachable (state, intent) pair keeps invariants intact."""
        intents = ["PLAY_MUSIC", "SKIP", "STOP_MUSIC"]
        for playlist_size in (0, 1, 3):
            for script in itertools.product(intents, repeat=4):
                agent = MediaAgent([f"t{i}" for i in range(playlist_size)])
                for intent in script:
                    agent.handle(resolved(intent))
                    MediaState(  # re-validating through the constructor
                        playlist=agent.state.playlist,
                        current_index=agent.state.current_index,
                        status=agent.state.status,
                    )


class TestBrowserMachine:
    def test_open_tab_focuses_it(self):
        agent = BrowserAgent()
        result = agent.handle(resolved("OPEN_TAB", {"destination": "news"}))
        assert result.status == "success"
        assert agent.state.active_tab == "tab-1"
        assert agent.state.tabs[0][1] == "news"

    def test_close_tab_by_target(self):
        agent = BrowserAgent()
        agent.handle(resolved("OPEN_TAB"))
        agent.handle(resolved("OPEN_TAB"))
        result = agent.handle(resolved("CLOSE_TAB", {"target": "tab-1"}))
        assert result.status == "success"
        assert [t[0] for t in agent.state.tabs] == ["tab-2"]

    def test_close_without_tabs_fails(self):
        agent = BrowserAgent()
        assert agent.handle(resolved("CLOSE_TAB")).status == "failure"

    def test_fixture_tabs_preserved(self):
        agent = BrowserAgent([("tab-1", "start")])
        assert agent.state.active_tab == "tab-1"
        BrowserState(tabs=agent.state.tabs, active_tab=agent.state.active_tab)


class TestDispatchGate:
    def test_allow_routes_to_agent(self):
        registry = ActionRegistry()
        registry.register(MediaAgent(["t1"]))
        result = dispatch(registry, resolved("PLAY_MUSIC"), allow("music"))
        assert result.status == "success"

    def test_non_allow_verdicts_always_raise(self):
        registry = ActionRegistry()
        registry.register(MediaAgent(["t1"]))
        rng = random.Random(5)
        verdicts = ["deny", "ask", "", "ALLOW", "allowed", "nope"]
        for _ in range(200):
            verdict = rng.choice(verdicts)
            decision = PolicyDecision(verdict, "r", "fuzz", 0, "music")
            with pytest.raises(GateViolation):
                dispatch(registry, resolved("PLAY_MUSIC"), decision)

    def test_category_mismatch_raises(self):
        registry = ActionRegistry()
        registry.register(MediaAgent(["t1"]))
        with pytest.raises(GateViolation):
            dispatch(registry, resolved("PLAY_MUSIC"), allow("browser"))

    def test_unclaimed_intent_is_failure_result(self):
        registry = ActionRegistry()
        result = dispatch(registry, resolved("PLAY_MUSIC"), allow("music"))
        assert result.status == "failure"


def test_success_requires_effects():
    with pytest.raises(InvalidArgument):
        ActionResult("success", "")
