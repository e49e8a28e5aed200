# src/ppcfkit/errors.py
from __future__ import annotations

from typing import Any, Optional

__all__ = [
    "PpcfError",
    "ParseError",
    "TypeCheckError",
    "PreconditionError",
    "ConfigError",
]


class PpcfError(Exception):
    """Base class for every domain error raised by ppcfkit."""


class ParseError(PpcfError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class TypeCheckError(PpcfError):
    def __init__(
        self,
        message: str,
        term: Any = None,
        expected: Any = None,
        actual: Any = None,
    ) -> None:
        super().__init__(message)
        self.term = term
        self.expected = expected
        self.actual = actual


class PreconditionError(PpcfError):
    pass


class ConfigError(PpcfError):
    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message)
        self.key = key
