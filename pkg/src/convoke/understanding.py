"""Rule-based intent parsing for Guarani/Jopara token streams.

The parser never rejects input: vocabulary it cannot map yields an UNKNOWN
frame rather than an error, and mixed or loanword forms are just tokens with
an `es` language tag in the lexicon. Negation is detected two ways: a surface
approximation of the nd(a)-...-i circumfix, and (authoritatively) lexicon
entries carrying the `negation` role.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .core import Utterance
from .errors import FileFormatError, Issue
from .textfmt import parse_kv, parse_sections

INTENT_INVENTORY = (
    "PLAY_MUSIC",
    "OPEN_TAB",
    "SKIP",
    "STOP_MUSIC",
    "CLOSE_TAB",
    "REJECTION",
    "CONFIRMATION",
    "UNKNOWN",
)

POSITIVE = "positive"
NEGATIVE = "negative"
NEUTRAL = "neutral"

# Stripped from token edges only; never apostrophes, which are phonemic.
_EDGE_PUNCT = ".,;:!?¿¡\"()[]"

_NEG_PREFIX = "nd"
_NEG_SUFFIX = "i"


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    role: str
    language_tag: str
    value: str | None = None


@dataclass(frozen=True)
class PatternRule:
    rule_id: str
    priority: int
    intent: str
    required_roles: frozenset[str]
    forbidden_roles: frozenset[str]
    slot_bindings: tuple[tuple[str, str], ...] = ()  # (slot name, role)


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[str, LexiconEntry]
    rules: tuple[PatternRule, ...]
    version: str = "0"

    def lookup(self, token: str) -> LexiconEntry | None:
        return self.entries.get(token)


@dataclass(frozen=True)
class IntentFrame:
    intent: str
    slots: Mapping[str, str]
    polarity: str
    confidence: float
    language_mix: float
    source_utterance: Utterance
    matched_rule: str | None = None

    def summary(self) -> str:
        return (
            f"intent={self.intent} polarity={self.polarity} "
            f"confidence={self.confidence:.2f} mix={self.language_mix:.2f}"
        )


def normalize(raw: str) -> list[str]:
    """Lowercase, trim, split on whitespace. Diacritics and the glottal-stop
    apostrophe pass through untouched; edge punctuation is dropped."""
    tokens: list[str] = []
    for piece in raw.strip().lower().split():
        piece = piece.strip(_EDGE_PUNCT)
        if piece:
            tokens.append(piece)
    return tokens


def load_lexicon(path: str | Path) -> Lexicon:
    path = Path(path)
    return parse_lexicon(path.read_text(encoding="utf-8"), source=str(path))


def parse_lexicon(text: str, source: str = "<lexicon>") -> Lexicon:
    doc = parse_sections(text, known_sections=("entries", "rules"))
    issues = doc.issues
    entries: dict[str, LexiconEntry] = {}
    seen_lines: dict[str, int] = {}
    for line in doc.section("entries"):
        surface = line.fields[0]
        normalized = normalize(surface)
        if len(normalized) != 1:
            issues.append(
                Issue(line.number, "parse-error", f"surface must normalize to one token: {surface!r}")
            )
            continue
        surface = normalized[0]
        kv = parse_kv(line.fields[1:], line.number, ("role", "lang", "value"), issues)
        if surface in entries:
            issues.append(
                Issue(
                    line.number,
                    "lexicon-conflict",
                    f"duplicate entry for {surface!r} (first at line {seen_lines[surface]})",
                )
            )
            continue
        role = kv.get("role")
        if not role:
            issues.append(Issue(line.number, "parse-error", f"entry {surface!r} missing role="))
            continue
        lang = kv.get("lang", "unknown")
        if lang not in ("gn", "es", "mixed", "unknown"):
            issues.append(Issue(line.number, "parse-error", f"unknown lang tag {lang!r}"))
            continue
        entries[surface] = LexiconEntry(
            surface=surface, role=role, language_tag=lang, value=kv.get("value")
        )
        seen_lines[surface] = line.number

    rules: list[PatternRule] = []
    rule_lines: dict[str, int] = {}
    for line in doc.section("rules"):
        rule_id = line.fields[0]
        kv = parse_kv(
            line.fields[1:], line.number, ("priority", "intent", "requires", "forbids", "slots"), issues
        )
        if rule_id in rule_lines:
            issues.append(
                Issue(
                    line.number,
                    "lexicon-conflict",
                    f"duplicate rule_id {rule_id!r} (first at line {rule_lines[rule_id]})",
                )
            )
            continue
        rule_lines[rule_id] = line.number
        intent = kv.get("intent", "")
        if intent not in INTENT_INVENTORY:
            issues.append(
                Issue(line.number, "unknown-intent", f"rule {rule_id!r} names unknown intent {intent!r}")
            )
            continue
        try:
            priority = int(kv.get("priority", "0"))
        except ValueError:
            issues.append(Issue(line.number, "parse-error", f"priority must be an integer"))
            continue
        required = frozenset(r for r in kv.get("requires", "").split(",") if r)
        forbidden = frozenset(r for r in kv.get("forbids", "").split(",") if r)
        if not required:
            issues.append(Issue(line.number, "parse-error", f"rule {rule_id!r} requires no roles"))
            continue
        if required & forbidden:
            issues.append(
                Issue(
                    line.number,
                    "parse-error",
                    f"rule {rule_id!r}: roles {sorted(required & forbidden)} both required and forbidden",
                )
            )
            continue
        bindings: list[tuple[str, str]] = []
        ok = True
        for pair in (p for p in kv.get("slots", "").split(",") if p):
            if ":" not in pair:
                issues.append(
                    Issue(line.number, "parse-error", f"slot binding must be slot:role, got {pair!r}")
                )
                ok = False
                continue
            slot, _, role = pair.partition(":")
            bindings.append((slot, role))
        if not ok:
            continue
        rules.append(
            PatternRule(
                rule_id=rule_id,
                priority=priority,
                intent=intent,
                required_roles=required,
                forbidden_roles=forbidden,
                slot_bindings=tuple(bindings),
            )
        )

    if issues:
        raise FileFormatError(source, issues)
    return Lexicon(entries=entries, rules=tuple(rules), version=doc.version)


def detect_polarity(tokens: Sequence[str], lexicon: Lexicon | None = None) -> str:
    """Negative on the nd-...-i circumfix approximation or a negation-role
    entry; positive on an affirmation-role entry; neutral otherwise."""
    roles = []
    if lexicon is not None:
        roles = [e.role for e in (lexicon.lookup(t) for t in tokens) if e is not None]
    if "negation" in roles:
        return NEGATIVE
    for i, tok in enumerate(tokens):
        if tok.startswith(_NEG_PREFIX):
            if any(t.endswith(_NEG_SUFFIX) for t in tokens[i:]):
                return NEGATIVE
    if "affirmation" in roles:
        return POSITIVE
    return NEUTRAL


def _negation_evidence(tokens: Sequence[str], lexicon: Lexicon) -> int:
    """Count tokens contributing negative evidence (for REJECTION confidence)."""
    evidence: set[int] = set()
    for i, tok in enumerate(tokens):
        entry = lexicon.lookup(tok)
        if entry is not None and entry.role == "negation":
            evidence.add(i)
    for i, tok in enumerate(tokens):
        if tok.startswith(_NEG_PREFIX):
            tail = [j for j in range(i, len(tokens)) if tokens[j].endswith(_NEG_SUFFIX)]
            if tail:
                evidence.add(i)
                evidence.add(tail[0])
            break
    return len(evidence)


def parse_intent(utterance: Utterance, lexicon: Lexicon) -> IntentFrame:
    """Map an utterance to an IntentFrame. Total: unknown vocabulary falls
    back to UNKNOWN at confidence 0 instead of raising."""
    tokens: list[str] = []
    for timed in utterance.tokens:
        tokens.extend(normalize(timed.surface))
    total = len(tokens)

    matched_entries = {t: lexicon.lookup(t) for t in tokens}
    roles_present = {e.role for e in matched_entries.values() if e is not None}
    es_count = sum(
        1 for e in matched_entries.values() if e is not None and e.language_tag == "es"
    )
    language_mix = (es_count / total) if total else 0.0
    polarity = detect_polarity(tokens, lexicon)

    fired: PatternRule | None = None
    # Stable sort preserves file order among equal priorities.
    for rule in sorted(lexicon.rules, key=lambda r: -r.priority):
        if rule.required_roles <= roles_present and not (rule.forbidden_roles & roles_present):
            fired = rule
            break

    if fired is not None:
        slots: dict[str, str] = {}
        for slot, role in fired.slot_bindings:
            for tok in tokens:
                entry = lexicon.lookup(tok)
                if entry is not None and entry.role == role:
                    slots[slot] = entry.value if entry.value is not None else tok
                    break
        matched_required = sum(
            1 for role in fired.required_roles if role in roles_present
        )
        confidence = min(1.0, matched_required / total) if total else 0.0
        if fired.intent == "REJECTION":
            polarity = NEGATIVE
        return IntentFrame(
            intent=fired.intent,
            slots=slots,
            polarity=polarity,
            confidence=confidence,
            language_mix=language_mix,
            source_utterance=utterance,
            matched_rule=fired.rule_id,
        )

    if polarity == NEGATIVE:
        evidence = _negation_evidence(tokens, lexicon)
        confidence = min(1.0, evidence / total) if total else 0.0
        return IntentFrame(
            intent="REJECTION",
            slots={},
            polarity=NEGATIVE,
            confidence=confidence,
            language_mix=language_mix,
            source_utterance=utterance,
        )

    return IntentFrame(
        intent="UNKNOWN",
        slots={},
        polarity=polarity,
        confidence=0.0,
        language_mix=language_mix,
        source_utterance=utterance,
    )
