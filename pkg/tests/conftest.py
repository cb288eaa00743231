from __future__ import annotations

import json

import pytest

from convoke import data_path
from convoke.core import TimedToken
from convoke.endpointing import SilenceAdvance


def make_tokens(text: str, start_ms: int = 0, duration_ms: int = 300, gap_ms: int = 100):
    tokens = []
    t = start_ms
    for word in text.split():
        tokens.append(TimedToken(surface=word, start_ms=t, end_ms=t + duration_ms))
        t += duration_ms + gap_ms
    return tokens


def utterance_events(text: str, start_ms: int = 0, trailing_ms: int = 1200):
    return [*make_tokens(text, start_ms=start_ms), SilenceAdvance(trailing_ms)]


@pytest.fixture(scope="session")
def base_config_dict() -> dict:
    return json.loads(data_path("session.json").read_text(encoding="utf-8"))


@pytest.fixture()
def session_config():
    from convoke.orchestrator import SessionConfig

    return SessionConfig.from_file(data_path("session.json"))


@pytest.fixture()
def session(session_config):
    from convoke.orchestrator import Session

    return Session(session_config)


@pytest.fixture(scope="session")
def seed_lexicon():
    from convoke.understanding import load_lexicon

    return load_lexicon(data_path("lexicon.gn.txt"))


@pytest.fixture(scope="session")
def synthetic_lexicon():
    from convoke.understanding import load_lexicon

    return load_lexicon(data_path("lexicon.synthetic.txt"))


@pytest.fixture(scope="session")
def seed_templates():
    from convoke.response import load_templates

    return load_templates(data_path("templates.gn.txt"))
