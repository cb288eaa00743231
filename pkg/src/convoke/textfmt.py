"""Shared machinery for the section-based line formats (lexicon, policy,
templates).

Format rules, common to all three files:

  - blank lines and lines starting with '#' are ignored
  - a line like `[entries]` opens a section
  - `version <n>` may appear before the first section
  - every other line is whitespace-separated fields; fields after the first
    are `key=value` pairs (no quoting -- values must be single tokens, except
    where a format-specific regex pulls out a quoted text field first)

Apostrophes are ordinary characters here: the Guarani glottal stop is written
with one, so nothing in this parser treats quotes as syntax.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import Issue


@dataclass(frozen=True)
class Line:
    number: int
    section: str
    fields: tuple[str, ...]


@dataclass
class ParsedDocument:
    version: str
    lines: list[Line]
    issues: list[Issue]

    def section(self, name: str) -> list[Line]:
        return [ln for ln in self.lines if ln.section == name]


def parse_sections(text: str, known_sections: tuple[str, ...]) -> ParsedDocument:
    version = "0"
    lines: list[Line] = []
    issues: list[Issue] = []
    current: str | None = None
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if name not in known_sections:
                issues.append(
                    Issue(number, "parse-error", f"unknown section [{name}]")
                )
                current = None
            else:
                current = name
            continue
        if current is None:
            parts = stripped.split()
            if parts[0] == "version" and len(parts) == 2:
                version = parts[1]
                continue
            issues.append(
                Issue(number, "parse-error", f"content outside any section: {stripped!r}")
            )
            continue
        lines.append(Line(number=number, section=current, fields=tuple(stripped.split())))
    return ParsedDocument(version=version, lines=lines, issues=issues)


def parse_kv(
    fields: tuple[str, ...],
    line: int,
    allowed: tuple[str, ...],
    issues: list[Issue],
) -> dict[str, str]:
    """Parse `key=value` fields, reporting unknown keys and bare words."""
    out: dict[str, str] = {}
    for field in fields:
        if "=" not in field:
            issues.append(Issue(line, "parse-error", f"expected key=value, got {field!r}"))
            continue
        key, _, value = field.partition("=")
        if key not in allowed:
            issues.append(Issue(line, "parse-error", f"unknown key {key!r}"))
            continue
        if key in out:
            issues.append(Issue(line, "parse-error", f"duplicate key {key!r}"))
            continue
        out[key] = value
    return out
