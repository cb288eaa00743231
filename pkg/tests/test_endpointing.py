from __future__ import annotations

import random

import pytest

from convoke.core import TimedToken, Utterance
from convoke.endpointing import (
    EndpointConfig,
    EndpointerState,
    EndpointEventKind,
    GapClass,
    SilenceAdvance,
    classify_gap,
    ingest,
    segment_stream,
)
from convoke.errors import InvalidArgument, StreamOrderViolation

from conftest import make_tokens

CFG = EndpointConfig(puso_gap_ms=250, hold_floor_gap_ms=600, end_of_turn_gap_ms=1200)


def brute_force_segment(tokens, trailing_ms, config, speaker_id="user"):
    """Independent oracle: split exactly where a gap reaches the end-of-turn
    threshold; the last group needs the trailing silence to close."""
    if not tokens:
        return []
    groups = [[tokens[0]]]
    for prev, cur in zip(tokens, tokens[1:]):
        if cur.start_ms - prev.end_ms >= config.end_of_turn_gap_ms:
            groups.append([cur])
        else:
            groups[-1].append(cur)
    if trailing_ms < config.end_of_turn_gap_ms:
        groups.pop()
    return [
        Utterance(
            tokens=tuple(group),
            speaker_id=speaker_id,
            turn_index=i + 1,
            started_ms=group[0].start_ms,
            completed_ms=group[-1].end_ms + config.end_of_turn_gap_ms,
        )
        for i, group in enumerate(groups)
    ]


def random_stream(rng: random.Random, config: EndpointConfig):
    tokens = []
    t = rng.randrange(0, 400)
    for i in range(rng.randrange(0, 24)):
        duration = rng.randrange(50, 600)
        tokens.append(TimedToken(f"w{i}", t, t + duration))
        gap = rng.choice(
            [
                0,
                1,
                rng.randrange(0, config.puso_gap_ms),
                config.puso_gap_ms - 1,
                config.puso_gap_ms,
                rng.randrange(config.puso_gap_ms, config.end_of_turn_gap_ms),
                config.hold_floor_gap_ms,
                config.end_of_turn_gap_ms,
                config.end_of_turn_gap_ms + rng.randrange(0, 2500),
            ]
        )
        t += duration + gap
    trailing = config.end_of_turn_gap_ms + rng.randrange(0, 600)
    return tokens, trailing


class TestClassifyGap:
    @pytest.mark.parametrize(
        "gap,expected",
        [
            (0, GapClass.INTRA_WORD),
            (CFG.puso_gap_ms - 1, GapClass.INTRA_WORD),
            (CFG.puso_gap_ms, GapClass.HESITATION),
            (CFG.hold_floor_gap_ms, GapClass.HESITATION),
            (CFG.end_of_turn_gap_ms - 1, GapClass.HESITATION),
            (CFG.end_of_turn_gap_ms, GapClass.TURN_END),
            (10_000, GapClass.TURN_END),
        ],
    )
    def test_boundaries_promote_to_later_class(self, gap, expected):
        assert classify_gap(gap, CFG) is expected

    def test_negative_gap_rejected(self):
        with pytest.raises(InvalidArgument):
            classify_gap(-1, CFG)

    def test_threshold_order_enforced(self):
        with pytest.raises(InvalidArgument):
            EndpointConfig(puso_gap_ms=600, hold_floor_gap_ms=250, end_of_turn_gap_ms=1200)


class TestIngest:
    def test_silence_without_open_turn_is_quiet(self):
        state = EndpointerState(config=CFG)
        state, events = ingest(state, SilenceAdvance(5000))
        assert events == []
        assert state.stream_now_ms == 5000

    def test_three_token_turn_completes_after_end_gap(self):
        state = EndpointerState(config=CFG)
        collected = []
        for token in make_tokens("Che ahenduse purahéi"):
            state, events = ingest(state, token)
            collected.extend(events)
        state, events = ingest(state, SilenceAdvance(CFG.end_of_turn_gap_ms))
        collected.extend(events)
        kinds = [e.kind for e in collected]
        assert kinds[0] is EndpointEventKind.UTTERANCE_STARTED
        assert kinds[-1] is EndpointEventKind.TURN_COMPLETED
        utterance = collected[-1].utterance
        assert [t.surface for t in utterance.tokens] == ["Che", "ahenduse", "purahéi"]
        assert utterance.turn_index == 1

    def test_hold_floor_emits_floor_held_but_keeps_turn_open(self):
        state = EndpointerState(config=CFG)
        state, _ = ingest(state, TimedToken("che", 0, 300))
        state, events = ingest(state, SilenceAdvance(CFG.hold_floor_gap_ms))
        assert [e.kind for e in events] == [EndpointEventKind.FLOOR_HELD]
        assert state.turn_open

    def test_floor_held_only_once_per_gap(self):
        state = EndpointerState(config=CFG)
        state, _ = ingest(state, TimedToken("che", 0, 300))
        state, first = ingest(state, SilenceAdvance(CFG.hold_floor_gap_ms))
        state, second = ingest(state, SilenceAdvance(100))
        assert [e.kind for e in first] == [EndpointEventKind.FLOOR_HELD]
        assert second == []

    def test_single_advance_crossing_both_thresholds_emits_both(self):
        state = EndpointerState(config=CFG)
        state, _ = ingest(state, TimedToken("che", 0, 300))
        state, events = ingest(state, SilenceAdvance(CFG.end_of_turn_gap_ms))
        assert [e.kind for e in events] == [
            EndpointEventKind.FLOOR_HELD,
            EndpointEventKind.TURN_COMPLETED,
        ]
        assert events[0].at_ms == 300 + CFG.hold_floor_gap_ms
        assert events[1].at_ms == 300 + CFG.end_of_turn_gap_ms

    def test_out_of_order_token_rejected(self):
        state = EndpointerState(config=CFG)
        state, _ = ingest(state, TimedToken("che", 0, 300))
        with pytest.raises(StreamOrderViolation):
            ingest(state, TimedToken("late", 100, 400))

    def test_floor_held_between_start_and_completion(self):
        state = EndpointerState(config=CFG)
        timeline = []
        for event_in in [TimedToken("che", 0, 300), SilenceAdvance(700), SilenceAdvance(700)]:
            state, events = ingest(state, event_in)
            timeline.extend(e.kind for e in events)
        assert timeline == [
            EndpointEventKind.UTTERANCE_STARTED,
            EndpointEventKind.FLOOR_HELD,
            EndpointEventKind.TURN_COMPLETED,
        ]


class TestSegmentStream:
    def test_empty_stream(self):
        assert segment_stream([], 5000, CFG) == []

    def test_two_tokens_with_end_gap_make_two_utterances(self):
        tokens = [TimedToken("a", 0, 300), TimedToken("b", 300 + CFG.end_of_turn_gap_ms, 2000)]
        utterances = segment_stream(tokens, CFG.end_of_turn_gap_ms, CFG)
        assert [len(u.tokens) for u in utterances] == [1, 1]

    def test_small_gaps_make_one_utterance(self):
        tokens = make_tokens("a b c d e", gap_ms=CFG.puso_gap_ms - 1)
        utterances = segment_stream(tokens, CFG.end_of_turn_gap_ms, CFG)
        assert [len(u.tokens) for u in utterances] == [5]

    def test_insufficient_trailing_silence_keeps_last_open(self):
        tokens = make_tokens("a b")
        assert segment_stream(tokens, CFG.end_of_turn_gap_ms - 1, CFG) == []

    def test_overlapping_tokens_rejected(self):
        tokens = [TimedToken("a", 0, 300), TimedToken("b", 200, 500)]
        with pytest.raises(StreamOrderViolation):
            segment_stream(tokens, 2000, CFG)


class TestOracleProperties:
    def test_oracle_equivalence_and_conservation_1000_streams(self):
        rng = random.Random(2026)
        for case in range(1000):
            tokens, trailing = random_stream(rng, CFG)
            got = segment_stream(tokens, trailing, CFG)
            expected = brute_force_segment(tokens, trailing, CFG)
            assert got == expected, f"case {case} diverged from oracle"
            flattened = [t for u in got for t in u.tokens]
            assert flattened == tokens, f"case {case} lost or duplicated tokens"

    def test_threshold_monotonicity(self):
        rng = random.Random(7)
        for _ in range(200):
            tokens, trailing = random_stream(rng, CFG)
            count = len(segment_stream(tokens, trailing, CFG))
            wider = EndpointConfig(
                puso_gap_ms=CFG.puso_gap_ms,
                hold_floor_gap_ms=CFG.hold_floor_gap_ms,
                end_of_turn_gap_ms=CFG.end_of_turn_gap_ms + 400,
            )
            assert len(segment_stream(tokens, trailing, wider)) <= count

    def test_puso_safety(self):
        rng = random.Random(13)
        for _ in range(300):
            tokens, trailing = random_stream(rng, CFG)
            utterances = segment_stream(tokens, trailing, CFG)
            for first, second in zip(utterances, utterances[1:]):
                gap = second.tokens[0].start_ms - first.tokens[-1].end_ms
                assert gap >= CFG.puso_gap_ms

    def test_incremental_matches_batch_with_explicit_silences(self):
        rng = random.Random(99)
        for _ in range(200):
            tokens, trailing = random_stream(rng, CFG)
            state = EndpointerState(config=CFG)
            utterances = []
            for token in tokens:
                gap = token.start_ms - state.stream_now_ms
                if gap > 0:
                    # Split the implied silence to exercise mid-gap advances.
                    state, events = ingest(state, SilenceAdvance(gap // 2))
                    utterances.extend(e.utterance for e in events if e.utterance)
                    state, events = ingest(state, SilenceAdvance(gap - gap // 2))
                    utterances.extend(e.utterance for e in events if e.utterance)
                state, events = ingest(state, token)
                utterances.extend(e.utterance for e in events if e.utterance)
            state, events = ingest(state, SilenceAdvance(trailing))
            utterances.extend(e.utterance for e in events if e.utterance)
            assert utterances == segment_stream(tokens, trailing, CFG)
