from __future__ import annotations

import itertools

import pytest

from convoke.errors import FileFormatError
from convoke.governance import (
    ALLOW,
    ASK,
    DENY,
    DISCARD,
    KEEP_PERSISTENT,
    KEEP_SESSION,
    ConsentState,
    decide_retention,
    evaluate_action,
    evaluate_response,
    parse_policy,
)

EMPTY = parse_policy("version 1\n")

ALLOW_MUSIC = parse_policy(
    """
version 1
[action_rules]
allow_music  category=music  verdict=allow
"""
)


class TestLoadPolicy:
    def test_empty_policy_defaults(self):
        assert EMPTY.action_rules == ()
        assert EMPTY.retention_default == "never"
        assert EMPTY.default_verdict == DENY

    def test_duplicate_rule_id_conflicts(self):
        doc = """
[action_rules]
r1  category=music  verdict=allow
r1  category=web    verdict=deny
"""
        with pytest.raises(FileFormatError) as err:
            parse_policy(doc)
        assert any(i.code == "policy-conflict" for i in err.value.issues)

    def test_duplicate_across_sections_conflicts(self):
        doc = """
[action_rules]
r1  category=music  verdict=allow
[response_rules]
r1  kind=denial  verdict=deny
"""
        with pytest.raises(FileFormatError):
            parse_policy(doc)

    def test_unknown_verdict_is_parse_error(self):
        with pytest.raises(FileFormatError) as err:
            parse_policy("[action_rules]\nr1 category=music verdict=maybe\n")
        assert any("maybe" in i.message for i in err.value.issues)

    def test_ask_not_allowed_on_response_rules(self):
        with pytest.raises(FileFormatError):
            parse_policy("[response_rules]\nr1 kind=denial verdict=ask\n")

    def test_allow_music_rule_present(self):
        assert ALLOW_MUSIC.action_rules[0].category == "music"
        assert ALLOW_MUSIC.action_rules[0].verdict == ALLOW


class TestEvaluateAction:
    def test_allow_music(self):
        decision = evaluate_action(ALLOW_MUSIC, ConsentState(), "PLAY_MUSIC", "music", 1, 0)
        assert decision.verdict == ALLOW
        assert decision.rule_id == "allow_music"
        assert "music" in decision.rationale

    def test_no_match_falls_to_default_deny(self):
        decision = evaluate_action(ALLOW_MUSIC, ConsentState(), "OPEN_TAB", "browser", 1, 0)
        assert decision.verdict == DENY
        assert decision.rule_id == "default"

    def test_deny_by_default_with_empty_policy(self):
        for intent, category in [("PLAY_MUSIC", "music"), ("OPEN_TAB", "browser")]:
            assert evaluate_action(EMPTY, ConsentState(), intent, category, 1, 0).verdict == DENY

    def test_first_matching_rule_wins(self):
        policy = parse_policy(
            """
[action_rules]
first   category=music  verdict=deny
second  category=music  verdict=allow
"""
        )
        assert evaluate_action(policy, ConsentState(), "PLAY_MUSIC", "music", 1, 0).rule_id == "first"

    def test_wildcard_matches_everything(self):
        policy = parse_policy("[action_rules]\nany category=* verdict=allow\n")
        assert evaluate_action(policy, ConsentState(), "OPEN_TAB", "browser", 1, 0).verdict == ALLOW

    def test_ask_consent_truth_table(self):
        ask_policy = parse_policy("[action_rules]\nask_music category=music verdict=ask\n")
        for granted, revoked_later in itertools.product([False, True], repeat=2):
            consent = ConsentState()
            if granted:
                consent = consent.record("category:music", True, 1)
            if revoked_later:
                consent = consent.record("category:music", False, 3)
            for turn in (1, 2, 3, 4):
                decision = evaluate_action(ask_policy, consent, "PLAY_MUSIC", "music", turn, 0)
                # Brute-force expectation straight from the consent event rules.
                effective = granted and not (revoked_later and turn >= 3)
                assert decision.verdict == (ALLOW if effective else ASK), (
                    granted, revoked_later, turn,
                )


class TestEvaluateResponse:
    def test_self_explanation_kinds_default_allow(self):
        for kind in ("confirmation", "denial", "repair_prompt"):
            assert evaluate_response(EMPTY, kind, 0).verdict == ALLOW

    def test_consent_prompt_falls_to_default(self):
        assert evaluate_response(EMPTY, "consent_prompt", 0).verdict == DENY

    def test_explicit_deny_rule_wins(self):
        policy = parse_policy("[response_rules]\nmute kind=confirmation verdict=deny\n")
        decision = evaluate_response(policy, "confirmation", 0)
        assert decision.verdict == DENY
        assert decision.rule_id == "mute"

    def test_rule_table_oracle(self):
        # Every (rule verdict, kind) combination against a one-rule table.
        for verdict in (ALLOW, DENY):
            for kind in ("confirmation", "denial", "repair_prompt", "consent_prompt"):
                policy = parse_policy(f"[response_rules]\nr kind={kind} verdict={verdict}\n")
                assert evaluate_response(policy, kind, 0).verdict == verdict


class TestRetention:
    def test_no_grant_never_policy_discards(self):
        assert decide_retention(EMPTY, ConsentState(), "audio", 1) == DISCARD

    def test_grant_alone_is_not_enough(self):
        consent = ConsentState().record("store_audio", True, 1)
        assert decide_retention(EMPTY, consent, "audio", 1) == DISCARD

    def test_policy_alone_is_not_enough(self):
        policy = parse_policy("[retention]\ndefault=session\n")
        assert decide_retention(policy, ConsentState(), "audio", 1) == DISCARD

    def test_truth_table(self):
        for retention, granted in itertools.product(
            ("never", "session", "persistent"), (False, True)
        ):
            policy = parse_policy(f"[retention]\ndefault={retention}\n")
            consent = ConsentState()
            if granted:
                consent = consent.record("store_transcript", True, 1)
            got = decide_retention(policy, consent, "transcript", 2)
            if not granted or retention == "never":
                assert got == DISCARD
            elif retention == "session":
                assert got == KEEP_SESSION
            else:
                assert got == KEEP_PERSISTENT


class TestConsentState:
    def test_latest_event_wins(self):
        consent = ConsentState().record("store_audio", True, 2).record("store_audio", False, 5)
        assert consent.effective("store_audio", 2)
        assert consent.effective("store_audio", 4)
        assert not consent.effective("store_audio", 5)

    def test_monotonicity_by_turn(self):
        # Effective status at turn n ignores later events entirely.
        consent = ConsentState().record("store_audio", True, 3)
        assert not consent.effective("store_audio", 2)
        assert consent.effective("store_audio", 3)

    def test_unknown_scope_not_granted(self):
        assert not ConsentState().effective("category:music", 10)
