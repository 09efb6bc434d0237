"""Access to the litmus tests shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..litmus import LitmusTest, parse

CORPUS_NAMES = (
    "iriw-fence",
    "iriw-nofence",
    "iriw-atomic",
    "iriw-fence-all",
    "mp-fence",
    "mp-relaxed",
    "load-initial",
)


def corpus_dir() -> Path:
    return Path(str(resources.files("memlit.corpus")))


def corpus_path(name: str) -> Path:
    path = corpus_dir() / f"{name}.litmus"
    if not path.exists():
        raise KeyError(f"no corpus test named {name!r}")
    return path


def load(name: str) -> LitmusTest:
    return parse(corpus_path(name).read_text())
