"""Turn segmentation over a simulated timed-token stream.

Gaps between tokens are classified by duration into three classes:

    gap < puso_gap_ms                     -> intra_word   (glottal-stop scale)
    puso_gap_ms <= gap < end_of_turn_gap  -> hesitation   (keep the floor)
    gap >= end_of_turn_gap_ms             -> turn_end

Only the turn_end class ever splits the stream. Inside the hesitation class,
once accumulated silence reaches hold_floor_gap_ms the endpointer emits a
floor_held event so downstream timing logic can see that the system is
deliberately waiting rather than done listening. Boundaries promote to the
later class (a gap exactly at a threshold belongs to the class above it).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Union

from .core import TimedToken, Utterance
from .errors import InvalidArgument, StreamOrderViolation


class GapClass(str, Enum):
    INTRA_WORD = "intra_word"
    HESITATION = "hesitation"
    TURN_END = "turn_end"


class EndpointEventKind(str, Enum):
    UTTERANCE_STARTED = "utterance_started"
    FLOOR_HELD = "floor_held"
    TURN_COMPLETED = "turn_completed"


@dataclass(frozen=True)
class EndpointConfig:
    puso_gap_ms: int = 250
    hold_floor_gap_ms: int = 600
    end_of_turn_gap_ms: int = 1200

    def __post_init__(self) -> None:
        if not (0 < self.puso_gap_ms < self.hold_floor_gap_ms < self.end_of_turn_gap_ms):
            raise InvalidArgument(
                "thresholds must satisfy 0 < puso_gap_ms < hold_floor_gap_ms "
                f"< end_of_turn_gap_ms, got {self.puso_gap_ms}/{self.hold_floor_gap_ms}"
                f"/{self.end_of_turn_gap_ms}"
            )


@dataclass(frozen=True)
class SilenceAdvance:
    """Explicit passage of silent time, in ms."""

    delta_ms: int

    def __post_init__(self) -> None:
        if self.delta_ms < 0:
            raise InvalidArgument(f"silence delta must be >= 0, got {self.delta_ms}")


StreamEvent = Union[TimedToken, SilenceAdvance]


@dataclass(frozen=True)
class EndpointEvent:
    kind: EndpointEventKind
    at_ms: int
    utterance: Utterance | None = None

    def __post_init__(self) -> None:
        if self.kind is EndpointEventKind.TURN_COMPLETED and self.utterance is None:
            raise InvalidArgument("turn_completed events must carry an utterance")


@dataclass(frozen=True)
class EndpointerState:
    config: EndpointConfig
    speaker_id: str = "user"
    stream_now_ms: int = 0
    open_tokens: tuple[TimedToken, ...] = ()
    turns_emitted: int = 0
    floor_event_sent: bool = field(default=False)

    @property
    def turn_open(self) -> bool:
        return bool(self.open_tokens)

    @property
    def last_token_end_ms(self) -> int:
        return self.open_tokens[-1].end_ms


def classify_gap(gap_ms: int, config: EndpointConfig) -> GapClass:
    if gap_ms < 0:
        raise InvalidArgument(f"gap must be >= 0, got {gap_ms}")
    if gap_ms < config.puso_gap_ms:
        return GapClass.INTRA_WORD
    if gap_ms < config.end_of_turn_gap_ms:
        return GapClass.HESITATION
    return GapClass.TURN_END


def _complete_turn(state: EndpointerState) -> tuple[EndpointerState, EndpointEvent]:
    tokens = state.open_tokens
    completed_ms = tokens[-1].end_ms + state.config.end_of_turn_gap_ms
    utterance = Utterance(
        tokens=tokens,
        speaker_id=state.speaker_id,
        turn_index=state.turns_emitted + 1,
        started_ms=tokens[0].start_ms,
        completed_ms=completed_ms,
    )
    new_state = replace(
        state,
        open_tokens=(),
        turns_emitted=state.turns_emitted + 1,
        floor_event_sent=False,
    )
    event = EndpointEvent(
        kind=EndpointEventKind.TURN_COMPLETED, at_ms=completed_ms, utterance=utterance
    )
    return new_state, event


def ingest(
    state: EndpointerState, event: StreamEvent
) -> tuple[EndpointerState, list[EndpointEvent]]:
    """Feed one stream event; returns the new state and any endpoint events.

    Tokens must not start before the current stream time. Silence is only
    "accumulated" through SilenceAdvance events; a late-arriving token implies
    the silence but the implied interval produces no floor_held (segmentation
    is unaffected either way).
    """
    events: list[EndpointEvent] = []

    if isinstance(event, SilenceAdvance):
        new_now = state.stream_now_ms + event.delta_ms
        state = replace(state, stream_now_ms=new_now)
        if state.turn_open:
            silence = new_now - state.last_token_end_ms
            if not state.floor_event_sent and silence >= state.config.hold_floor_gap_ms:
                # Emitted even when the same advance also closes the turn, so
                # splitting one advance into two never changes the event list.
                held_at = state.last_token_end_ms + state.config.hold_floor_gap_ms
                events.append(EndpointEvent(kind=EndpointEventKind.FLOOR_HELD, at_ms=held_at))
                state = replace(state, floor_event_sent=True)
            if silence >= state.config.end_of_turn_gap_ms:
                state, completed = _complete_turn(state)
                events.append(completed)
        return state, events

    token = event
    if token.start_ms < state.stream_now_ms:
        raise StreamOrderViolation(
            f"token {token.surface!r} starts at {token.start_ms} but the stream "
            f"is already at {state.stream_now_ms}"
        )
    if state.turn_open:
        gap = token.start_ms - state.last_token_end_ms
        if classify_gap(gap, state.config) is GapClass.TURN_END:
            state, completed = _complete_turn(state)
            events.append(completed)
    if not state.turn_open:
        events.append(
            EndpointEvent(kind=EndpointEventKind.UTTERANCE_STARTED, at_ms=token.start_ms)
        )
    state = replace(
        state,
        stream_now_ms=token.end_ms,
        open_tokens=state.open_tokens + (token,),
        floor_event_sent=False,
    )
    return state, events


def segment_stream(
    tokens: Iterable[TimedToken],
    trailing_silence_ms: int,
    config: EndpointConfig,
    speaker_id: str = "user",
) -> list[Utterance]:
    """Batch segmentation: identical to driving ingest() over the same tokens
    followed by one trailing SilenceAdvance. A final group still inside its
    silence window stays open and is not emitted."""
    state = EndpointerState(config=config, speaker_id=speaker_id)
    utterances: list[Utterance] = []
    for token in tokens:
        state, events = ingest(state, token)
        utterances.extend(e.utterance for e in events if e.utterance is not None)
    state, events = ingest(state, SilenceAdvance(trailing_silence_ms))
    utterances.extend(e.utterance for e in events if e.utterance is not None)
    return utterances
