"""convoke: a deterministic, trace-first multi-agent dialogue runtime."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"

PROTOCOL_VERSION = 1


def data_path(*parts: str) -> Path:
    """Path to a shipped data file (seed lexicon, policies, scenarios...)."""
    root = resources.files(__name__) / "data"
    return Path(str(root.joinpath(*parts)))
