# src/ppcfkit/log.py
from __future__ import annotations

import sys

__all__ = ["warn", "note", "set_verbose"]

_VERBOSE = False


def set_verbose(flag: bool) -> None:
    global _VERBOSE
    _VERBOSE = bool(flag)


def warn(message: str) -> None:
    """Emit a warning line to stderr. Text is printed verbatim."""
    print(message, file=sys.stderr)


def note(message: str) -> None:
    """Progress line on stderr, only with --verbose."""
    if _VERBOSE:
        print(message, file=sys.stderr)
