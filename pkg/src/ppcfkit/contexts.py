# src/ppcfkit/contexts.py
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List

from .ast import NAT, Arrow, Term, TyCtx
from .errors import PreconditionError
from .parse import parse
from .typecheck import typecheck

__all__ = ["NamedContext", "builtin_contexts", "load_contexts", "AMPLIFIER_SRC"]

CONTEXT_TYPE = Arrow(NAT, NAT)


@dataclass(frozen=True)
class NamedContext:
    name: str
    term: Term


# c(u) = u_0 / (1 - u_1 - u_2 - ...): retries until its argument shows 0
AMPLIFIER_SRC = "fix (fun f: nat -> nat => fun x: nat => ifz x then 0 else f x)"

# Built-ins, in report order
_BUILTINS: List[tuple[str, str]] = []
_BUILTINS.append(("identity", "fun y: nat => y"))
_BUILTINS.append(("amplifier", AMPLIFIER_SRC))
_BUILTINS.append(("succ-then-test", "fun y: nat => ifz pred (succ y) then 0 else 1"))
_BUILTINS.append(("let-duplication", "fun y: nat => let a = y in let b = y in ifz a then b else 1"))
_BUILTINS.append(("negate", "fun y: nat => ifz y then 1 else 0"))


def _checked(name: str, term: Term) -> NamedContext:
    ty = typecheck(TyCtx(), term)
    if ty != CONTEXT_TYPE:
        raise PreconditionError(f"context {name} must have type nat -> nat")
    return NamedContext(name, term)


def builtin_contexts() -> List[NamedContext]:
    return [_checked(name, parse(src)) for name, src in _BUILTINS]


def load_contexts(directory: Path) -> List[NamedContext]:
    """Every *.ppcf file in directory, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"context directory not found: {directory}")
    return [
        _checked(path.stem, parse(path.read_text(encoding="utf-8")))
        for path in sorted(directory.glob("*.ppcf"))
    ]
