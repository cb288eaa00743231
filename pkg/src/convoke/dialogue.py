"""Conversation memory: turn history, a salience-ordered focus stack, and the
resolution of implicit references against it.

Salience is recency of mention; ties go to the more recently pushed entity,
so an entity introduced this turn outranks one merely refreshed this turn.
A rejection is mapped to the active domain's "dismiss current" intent (SKIP
for media, CLOSE_TAB for browser); with nothing in focus it becomes a repair
request instead of an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Mapping

from .understanding import IntentFrame

if TYPE_CHECKING:
    from .actions import ActionResult

ENTITY_KINDS = ("song", "playlist", "tab", "volume_level", "generic")

DOMAIN_MEDIA = "media"
DOMAIN_BROWSER = "browser"
DOMAIN_NONE = "none"

# Which entity kind "this" refers to, per domain.
_DISMISS_TARGET_KIND = {DOMAIN_MEDIA: "song", DOMAIN_BROWSER: "tab"}
_DISMISS_INTENT = {DOMAIN_MEDIA: "SKIP", DOMAIN_BROWSER: "CLOSE_TAB"}

_KIND_DOMAIN = {
    "song": DOMAIN_MEDIA,
    "playlist": DOMAIN_MEDIA,
    "volume_level": DOMAIN_MEDIA,
    "tab": DOMAIN_BROWSER,
}

# Slot values carrying an unresolved implicit reference.
THIS_MARKER = "@this"

FOCUS_CAPACITY = 16


@dataclass(frozen=True)
class FocusEntity:
    entity_id: str
    entity_kind: str
    introduced_turn: int
    last_mentioned_turn: int
    attributes: Mapping[str, str] = field(default_factory=dict)
    insertion_seq: int = 0

    @property
    def domain(self) -> str:
        return _KIND_DOMAIN.get(self.entity_kind, DOMAIN_NONE)


@dataclass(frozen=True)
class ResolvedIntent:
    intent: str
    slots: Mapping[str, str]
    resolution_notes: str
    origin_frame: IntentFrame


@dataclass(frozen=True)
class RepairRequest:
    reason: str
    origin_frame: IntentFrame


@dataclass(frozen=True)
class HistoryEntry:
    turn_index: int
    intent: str
    resolved_intent: str | None
    repair_reason: str | None
    action_status: str | None


@dataclass(frozen=True)
class PendingRepair:
    reason: str
    attempts: int


@dataclass(frozen=True)
class DialogueState:
    history: tuple[HistoryEntry, ...] = ()
    focus_stack: tuple[FocusEntity, ...] = ()  # most salient first
    active_domain: str = DOMAIN_NONE
    pending_repair: PendingRepair | None = None
    max_repair_attempts: int = 2
    insertion_counter: int = 0

    def snapshot(self) -> dict:
        return {
            "turns": len(self.history),
            "active_domain": self.active_domain,
            "pending_repair": (
                {"reason": self.pending_repair.reason, "attempts": self.pending_repair.attempts}
                if self.pending_repair
                else None
            ),
            "focus_stack": [
                {
                    "entity_id": e.entity_id,
                    "entity_kind": e.entity_kind,
                    "introduced_turn": e.introduced_turn,
                    "last_mentioned_turn": e.last_mentioned_turn,
                    "attributes": dict(e.attributes),
                }
                for e in self.focus_stack
            ],
            "history": [
                {
                    "turn_index": h.turn_index,
                    "intent": h.intent,
                    "resolved_intent": h.resolved_intent,
                    "repair_reason": h.repair_reason,
                    "action_status": h.action_status,
                }
                for h in self.history
            ],
        }


def most_salient(
    state: DialogueState,
    kind: str | None = None,
    domain: str | None = None,
) -> FocusEntity | None:
    for entity in state.focus_stack:
        if kind is not None and entity.entity_kind != kind:
            continue
        if domain is not None and entity.domain != domain:
            continue
        return entity
    return None


def resolve(state: DialogueState, frame: IntentFrame) -> ResolvedIntent | RepairRequest:
    """Refine a raw frame against the focus stack.

    Repair outcomes are ordinary values, not errors; the caller decides how
    to prompt the user.
    """
    if frame.intent == "UNKNOWN":
        return RepairRequest(reason="intent-unknown", origin_frame=frame)

    if frame.intent == "REJECTION":
        if state.active_domain == DOMAIN_NONE:
            return RepairRequest(reason="no-referent", origin_frame=frame)
        kind = _DISMISS_TARGET_KIND[state.active_domain]
        target = most_salient(state, kind=kind, domain=state.active_domain)
        if target is None:
            return RepairRequest(reason="no-referent", origin_frame=frame)
        intent = _DISMISS_INTENT[state.active_domain]
        notes = (
            f"implicit referent: this={kind} {target.entity_id}; "
            f"REJECTION -> {intent}(target={target.entity_id})"
        )
        return ResolvedIntent(
            intent=intent,
            slots={"target": target.entity_id},
            resolution_notes=notes,
            origin_frame=frame,
        )

    if frame.intent == "CONFIRMATION":
        if state.pending_repair is not None:
            notes = f"confirmation acknowledges pending clarification ({state.pending_repair.reason})"
        else:
            notes = "confirmation with nothing pending; acknowledged"
        return ResolvedIntent(
            intent="CONFIRMATION", slots=dict(frame.slots), resolution_notes=notes, origin_frame=frame
        )

    # Direct intents pass through; implicit slot markers resolve against focus.
    slots = dict(frame.slots)
    notes = f"direct intent {frame.intent} passed through"
    for name, value in list(slots.items()):
        if value == THIS_MARKER:
            target = most_salient(state)
            if target is None:
                return RepairRequest(reason="no-referent", origin_frame=frame)
            slots[name] = target.entity_id
            notes = f"implicit referent: this={target.entity_kind} {target.entity_id}; slot {name} bound"
    return ResolvedIntent(
        intent=frame.intent, slots=slots, resolution_notes=notes, origin_frame=frame
    )


def _push_entity(state: DialogueState, seed: FocusEntity, turn_index: int) -> DialogueState:
    existing = next((e for e in state.focus_stack if e.entity_id == seed.entity_id), None)
    remaining = tuple(e for e in state.focus_stack if e.entity_id != seed.entity_id)
    counter = state.insertion_counter + 1
    if existing is not None:
        entity = replace(
            existing,
            last_mentioned_turn=turn_index,
            attributes=dict(seed.attributes) or dict(existing.attributes),
            insertion_seq=counter,
        )
    else:
        entity = replace(
            seed,
            introduced_turn=turn_index,
            last_mentioned_turn=turn_index,
            insertion_seq=counter,
        )
    stack = (entity,) + remaining
    if len(stack) > FOCUS_CAPACITY:
        stack = stack[:FOCUS_CAPACITY]
    return replace(state, focus_stack=stack, insertion_counter=counter)


def _refresh_entity(state: DialogueState, entity_id: str, turn_index: int) -> DialogueState:
    entity = next((e for e in state.focus_stack if e.entity_id == entity_id), None)
    if entity is None:
        return state
    return _push_entity(state, entity, turn_index)


@dataclass(frozen=True)
class CommitResult:
    state: DialogueState
    escalated: bool


def commit_turn(
    state: DialogueState,
    frame: IntentFrame,
    resolved: ResolvedIntent | RepairRequest,
    result: "ActionResult | None" = None,
    turn_index: int = 0,
) -> CommitResult:
    """Record a completed turn. Successful turns clear any pending repair;
    repair turns increment it, escalating when attempts hit the limit."""
    escalated = False
    if isinstance(resolved, RepairRequest):
        attempts = (state.pending_repair.attempts if state.pending_repair else 0) + 1
        if attempts >= state.max_repair_attempts:
            escalated = True
            state = replace(state, pending_repair=None)
        else:
            state = replace(
                state, pending_repair=PendingRepair(reason=resolved.reason, attempts=attempts)
            )
        entry = HistoryEntry(
            turn_index=turn_index,
            intent=frame.intent,
            resolved_intent=None,
            repair_reason=resolved.reason,
            action_status=None,
        )
        return CommitResult(replace(state, history=state.history + (entry,)), escalated)

    action_status = result.status if result is not None else None
    updated = tuple(result.updated_entities) if result is not None else ()
    if action_status == "success":
        # Refresh the mentioned target first so a newly introduced entity
        # (e.g. the next track) lands above it.
        target = resolved.slots.get("target")
        if target:
            state = _refresh_entity(state, target, turn_index)
        for seed in updated:
            state = _push_entity(state, seed, turn_index)
        domain = _KIND_DOMAIN.get(updated[0].entity_kind) if updated else None
        if domain:
            state = replace(state, active_domain=domain)
    state = replace(state, pending_repair=None)
    entry = HistoryEntry(
        turn_index=turn_index,
        intent=frame.intent,
        resolved_intent=resolved.intent,
        repair_reason=None,
        action_status=action_status,
    )
    return CommitResult(replace(state, history=state.history + (entry,)), escalated)
