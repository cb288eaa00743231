"""Action agents: a registry of per-domain executors plus two built-in mocks,
a media playback state machine and a browser tab set.

Mocks keep the real integrations' contract (intents in, results and focus
entities out) at desk scale. Dispatch refuses anything but an allow verdict;
hitting that refusal means the orchestrator's gate was bypassed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

from .dialogue import FocusEntity, ResolvedIntent
from .errors import GateViolation, InvalidArgument, RegistrationConflict
from .governance import ALLOW, PolicyDecision

CATEGORY_MUSIC = "music"
CATEGORY_BROWSER = "browser"

STATUS_SUCCESS = "success"
STATUS_FAILURE = "failure"


@dataclass(frozen=True)
class ActionResult:
    status: str
    effects: str
    updated_entities: tuple[FocusEntity, ...] = ()

    def __post_init__(self) -> None:
        if self.status == STATUS_SUCCESS and not self.effects:
            raise InvalidArgument("successful results must describe their effects")

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "effects": self.effects,
            "updated_entities": [e.entity_id for e in self.updated_entities],
        }


@dataclass(frozen=True)
class ActionAgentDescriptor:
    agent_name: str
    handled_intents: frozenset[str]
    category: str


class ActionAgent(Protocol):
    descriptor: ActionAgentDescriptor

    def handle(self, resolved: ResolvedIntent) -> ActionResult: ...


@dataclass(frozen=True)
class MediaState:
    playlist: tuple[str, ...]
    current_index: int | None = None
    status: str = "stopped"

    def __post_init__(self) -> None:
        if (self.status == "playing") != (self.current_index is not None):
            raise InvalidArgument("current_index must be present exactly while playing")
        if self.current_index is not None and not (0 <= self.current_index < len(self.playlist)):
            raise InvalidArgument("current_index out of playlist bounds")


@dataclass(frozen=True)
class BrowserState:
    tabs: tuple[tuple[str, str], ...] = ()  # (tab id, destination)
    active_tab: str | None = None

    def __post_init__(self) -> None:
        if self.active_tab is not None and self.active_tab not in {t[0] for t in self.tabs}:
            raise InvalidArgument("active_tab not present in tabs")


def _song_entity(track: str, position: int, total: int) -> FocusEntity:
    return FocusEntity(
        entity_id=track,
        entity_kind="song",
        introduced_turn=0,
        last_mentioned_turn=0,
        attributes={"position": f"{position + 1}/{total}"},
    )


class MediaAgent:
    """Playlist playback. PLAY starts at the head of the configured default
    playlist; SKIP advances and wraps past the end."""

    def __init__(self, playlist: Sequence[str]):
        self.descriptor = ActionAgentDescriptor(
            agent_name="media",
            handled_intents=frozenset({"PLAY_MUSIC", "SKIP", "STOP_MUSIC"}),
            category=CATEGORY_MUSIC,
        )
        self.state = MediaState(playlist=tuple(playlist))

    def handle(self, resolved: ResolvedIntent) -> ActionResult:
        state = self.state
        if resolved.intent == "PLAY_MUSIC":
            if not state.playlist:
                return ActionResult(STATUS_FAILURE, "no tracks in the default playlist")
            if state.status == "playing":
                track = state.playlist[state.current_index]
                return ActionResult(
                    STATUS_SUCCESS,
                    f"already playing {track}",
                    (_song_entity(track, state.current_index, len(state.playlist)),),
                )
            self.state = replace(state, status="playing", current_index=0)
            track = state.playlist[0]
            return ActionResult(
                STATUS_SUCCESS,
                f"playback started: {track} (1/{len(state.playlist)})",
                (_song_entity(track, 0, len(state.playlist)),),
            )
        if resolved.intent == "SKIP":
            if state.status != "playing":
                return ActionResult(STATUS_FAILURE, "nothing is playing")
            nxt = (state.current_index + 1) % len(state.playlist)
            self.state = replace(state, current_index=nxt)
            track = state.playlist[nxt]
            return ActionResult(
                STATUS_SUCCESS,
                f"NEXT_TRACK: playing {track} ({nxt + 1}/{len(state.playlist)})",
                (_song_entity(track, nxt, len(state.playlist)),),
            )
        if resolved.intent == "STOP_MUSIC":
            if state.status != "playing":
                return ActionResult(STATUS_FAILURE, "nothing is playing")
            self.state = replace(state, status="stopped", current_index=None)
            return ActionResult(STATUS_SUCCESS, "playback stopped")
        return ActionResult(STATUS_FAILURE, f"media agent cannot handle {resolved.intent}")


class BrowserAgent:
    """Tab bookkeeping. OPEN_TAB appends and focuses; CLOSE_TAB closes the
    slot target or the active tab."""

    def __init__(self, tabs: Sequence[tuple[str, str]] = ()):
        self.descriptor = ActionAgentDescriptor(
            agent_name="browser",
            handled_intents=frozenset({"OPEN_TAB", "CLOSE_TAB"}),
            category=CATEGORY_BROWSER,
        )
        self.state = BrowserState(tabs=tuple(tabs), active_tab=tabs[-1][0] if tabs else None)
        self._counter = len(tabs)

    def handle(self, resolved: ResolvedIntent) -> ActionResult:
        state = self.state
        if resolved.intent == "OPEN_TAB":
            self._counter += 1
            tab_id = f"tab-{self._counter}"
            destination = resolved.slots.get("destination", "about:blank")
            self.state = BrowserState(
                tabs=state.tabs + ((tab_id, destination),), active_tab=tab_id
            )
            entity = FocusEntity(
                entity_id=tab_id,
                entity_kind="tab",
                introduced_turn=0,
                last_mentioned_turn=0,
                attributes={"destination": destination},
            )
            return ActionResult(STATUS_SUCCESS, f"opened {tab_id} -> {destination}", (entity,))
        if resolved.intent == "CLOSE_TAB":
            target = resolved.slots.get("target") or state.active_tab
            if target is None or target not in {t[0] for t in state.tabs}:
                return ActionResult(STATUS_FAILURE, "no such tab to close")
            remaining = tuple(t for t in state.tabs if t[0] != target)
            active = remaining[-1][0] if remaining else None
            self.state = BrowserState(tabs=remaining, active_tab=active)
            return ActionResult(STATUS_SUCCESS, f"closed {target}")
        return ActionResult(STATUS_FAILURE, f"browser agent cannot handle {resolved.intent}")


@dataclass
class ActionRegistry:
    agents: dict[str, ActionAgent] = field(default_factory=dict)  # intent -> agent

    def register(self, agent: ActionAgent) -> None:
        claimed = agent.descriptor.handled_intents & set(self.agents)
        if claimed:
            raise RegistrationConflict(
                f"intents already claimed: {sorted(claimed)} (by "
                f"{', '.join(sorted({self.agents[i].descriptor.agent_name for i in claimed}))})"
            )
        for intent in agent.descriptor.handled_intents:
            self.agents[intent] = agent

    def agent_for(self, intent: str) -> ActionAgent | None:
        return self.agents.get(intent)

    def category_for(self, intent: str) -> str | None:
        agent = self.agents.get(intent)
        return agent.descriptor.category if agent else None

    def categories(self) -> tuple[str, ...]:
        return tuple(sorted({a.descriptor.category for a in self.agents.values()}))


def dispatch(
    registry: ActionRegistry, resolved: ResolvedIntent, decision: PolicyDecision
) -> ActionResult:
    """Execute an approved intent. A non-allow verdict, or a decision issued
    for a different category, is a gate violation and raises hard."""
    if decision.verdict != ALLOW:
        raise GateViolation(
            f"dispatch of {resolved.intent} with verdict {decision.verdict!r}"
        )
    agent = registry.agent_for(resolved.intent)
    if agent is None:
        return ActionResult(STATUS_FAILURE, f"no agent handles {resolved.intent}")
    if decision.category and decision.category != agent.descriptor.category:
        raise GateViolation(
            f"decision was issued for category {decision.category!r}, "
            f"agent handles {agent.descriptor.category!r}"
        )
    return agent.handle(resolved)
