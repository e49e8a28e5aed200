# src/ppcfkit/__init__.py
"""Tape-driven Krivine machines and power-series semantics for probabilistic PCF."""
from .ast import Label
from .errors import ConfigError, ParseError, PpcfError, PreconditionError, TypeCheckError
from .parse import parse, pretty

__version__ = "0.1.0"

__all__ = [
    "Label", "parse", "pretty",
    "PpcfError", "ParseError", "TypeCheckError", "PreconditionError", "ConfigError",
    "__version__",
]
