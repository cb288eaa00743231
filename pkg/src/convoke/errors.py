"""Exception types shared across the runtime."""

from __future__ import annotations

from dataclasses import dataclass


class ConvokeError(Exception):
    """Base class for all runtime errors."""


class InvalidArgument(ConvokeError):
    pass


class StreamOrderViolation(ConvokeError):
    """A timed event arrived out of order or overlapping the previous one."""


class TraceOrderViolation(ConvokeError):
    """A trace step would regress logical time."""


class RegistrationConflict(ConvokeError):
    """Two action agents claim the same intent."""


class GateViolation(ConvokeError):
    """An action was dispatched without an allow verdict. Must be unreachable
    through the orchestrator; reaching it is a bug, not a user error."""


class InvalidScope(ConvokeError):
    """Unknown consent scope."""


class NotFound(ConvokeError):
    pass


class ConfigError(ConvokeError):
    """Invalid session or template configuration, detected at load time."""


class SessionCreationError(ConvokeError):
    def __init__(self, message: str, failing_file: str | None = None):
        super().__init__(message)
        self.failing_file = failing_file


@dataclass(frozen=True)
class Issue:
    """One diagnostic from a file loader: line number, stable code, message."""

    line: int
    code: str
    message: str

    def render(self) -> str:
        return f"line {self.line}: [{self.code}] {self.message}"


class FileFormatError(ConvokeError):
    """Raised by the lexicon/policy/template/scenario loaders.

    Carries every violation found, not just the first, so `convoke validate`
    can report them all.
    """

    def __init__(self, path: str, issues: list[Issue]):
        self.path = path
        self.issues = issues
        lines = "; ".join(i.render() for i in issues[:5])
        more = "" if len(issues) <= 5 else f" (+{len(issues) - 5} more)"
        super().__init__(f"{path}: {lines}{more}")
