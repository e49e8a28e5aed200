# src/ppcfkit/ast.py
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, FrozenSet, Iterable, Iterator, Optional, Tuple, Union

__all__ = [
    "Nat", "Arrow", "Ty", "NAT", "arrow",
    "Label",
    "Num", "Var", "Succ", "Pred", "Dice", "DiceLab", "Let", "If", "App", "Abs", "Fix", "Mark",
    "Term",
    "Empty", "Arg", "SuccF", "PredF", "IfF", "LetF", "Stack", "EMPTY",
    "TyCtx",
    "free_vars", "is_closed", "subst", "labels", "is_core", "is_lab", "is_lc",
    "map_children", "subterms", "apply_args", "stack_frames", "fresh_name", "as_rat",
]


# ---------- types ----------

@dataclass(frozen=True)
class Nat:
    def __str__(self) -> str:
        return "nat"


@dataclass(frozen=True)
class Arrow:
    dom: "Ty"
    cod: "Ty"


Ty = Union[Nat, Arrow]
NAT: Nat = Nat()


def arrow(*tys: Ty) -> Ty:
    """arrow(a, b, c) is a -> (b -> c)."""
    out = tys[-1]
    for t in reversed(tys[:-1]):
        out = Arrow(t, out)
    return out


@dataclass(frozen=True, order=True)
class Label:
    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("label name must be nonempty")

    def __str__(self) -> str:
        return self.name


def as_rat(value: Union[int, str, float, Fraction]) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


def _check_prob(r: Fraction) -> None:
    if not (0 <= r <= 1):
        raise ValueError(f"probability {r} outside [0,1]")


# ---------- terms ----------

@dataclass(frozen=True)
class Num:
    n: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Succ:
    t: "Term"


@dataclass(frozen=True)
class Pred:
    t: "Term"


@dataclass(frozen=True)
class Dice:
    r: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", as_rat(self.r))
        _check_prob(self.r)


@dataclass(frozen=True)
class DiceLab:
    label: Label
    r: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", as_rat(self.r))
        _check_prob(self.r)


@dataclass(frozen=True)
class Let:
    x: str
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class If:
    scrut: "Term"
    zero: "Term"
    nonzero: "Term"


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Abs:
    x: str
    ty: Ty
    body: "Term"


@dataclass(frozen=True)
class Fix:
    t: "Term"


@dataclass(frozen=True)
class Mark:
    t: "Term"
    label: Label


Term = Union[Num, Var, Succ, Pred, Dice, DiceLab, Let, If, App, Abs, Fix, Mark]


# ---------- stacks ----------

@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Arg:
    m: Term
    rest: "Stack"


@dataclass(frozen=True)
class SuccF:
    rest: "Stack"


@dataclass(frozen=True)
class PredF:
    rest: "Stack"


@dataclass(frozen=True)
class IfF:
    zero: Term
    nonzero: Term
    rest: "Stack"


@dataclass(frozen=True)
class LetF:
    x: str
    body: Term
    rest: "Stack"


Stack = Union[Empty, Arg, SuccF, PredF, IfF, LetF]
EMPTY: Empty = Empty()


def stack_frames(stack: Stack) -> Iterator[Stack]:
    """Frames from the top down, Empty excluded."""
    while not isinstance(stack, Empty):
        yield stack
        stack = stack.rest


# ---------- typing contexts ----------

@dataclass(frozen=True)
class TyCtx:
    entries: Tuple[Tuple[str, Ty], ...] = ()

    def __post_init__(self) -> None:
        names = [x for x, _ in self.entries]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate variable in context: {names}")

    def lookup(self, x: str) -> Optional[Ty]:
        for name, ty in reversed(self.entries):
            if name == x:
                return ty
        return None

    def extend(self, x: str, ty: Ty) -> "TyCtx":
        # a rebound name shadows the outer one
        kept = tuple(e for e in self.entries if e[0] != x)
        return TyCtx(kept + ((x, ty),))

    def names(self) -> Tuple[str, ...]:
        return tuple(x for x, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, Ty]]:
        return iter(self.entries)


# ---------- structural helpers ----------

def map_children(term: Term, f: Callable[[Term], Term]) -> Term:
    """Rebuild term with f applied to each immediate subterm."""
    if isinstance(term, (Num, Var, Dice, DiceLab)):
        return term
    if isinstance(term, Succ):
        return Succ(f(term.t))
    if isinstance(term, Pred):
        return Pred(f(term.t))
    if isinstance(term, Let):
        return Let(term.x, f(term.bound), f(term.body))
    if isinstance(term, If):
        return If(f(term.scrut), f(term.zero), f(term.nonzero))
    if isinstance(term, App):
        return App(f(term.fn), f(term.arg))
    if isinstance(term, Abs):
        return Abs(term.x, term.ty, f(term.body))
    if isinstance(term, Fix):
        return Fix(f(term.t))
    if isinstance(term, Mark):
        return Mark(f(term.t), term.label)
    raise TypeError(f"not a term: {term!r}")


def _children(term: Term) -> Tuple[Term, ...]:
    if isinstance(term, (Succ, Pred, Fix, Mark)):
        return (term.t,)
    if isinstance(term, Let):
        return (term.bound, term.body)
    if isinstance(term, If):
        return (term.scrut, term.zero, term.nonzero)
    if isinstance(term, App):
        return (term.fn, term.arg)
    if isinstance(term, Abs):
        return (term.body,)
    return ()


def subterms(term: Term) -> Iterator[Term]:
    stack = [term]
    while stack:
        t = stack.pop()
        yield t
        stack.extend(_children(t))


def free_vars(term: Term) -> FrozenSet[str]:
    if isinstance(term, Var):
        return frozenset((term.name,))
    if isinstance(term, Abs):
        return free_vars(term.body) - {term.x}
    if isinstance(term, Let):
        return free_vars(term.bound) | (free_vars(term.body) - {term.x})
    out: FrozenSet[str] = frozenset()
    for c in _children(term):
        out |= free_vars(c)
    return out


def is_closed(term: Term) -> bool:
    return not free_vars(term)


def _all_names(term: Term) -> set[str]:
    names: set[str] = set()
    for t in subterms(term):
        if isinstance(t, Var):
            names.add(t.name)
        elif isinstance(t, (Abs, Let)):
            names.add(t.x)
    return names


_FRESH = itertools.count(1)


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    taken = set(avoid)
    stem = base.split("_")[0] or "v"
    while True:
        cand = f"{stem}_{next(_FRESH)}"
        if cand not in taken:
            return cand


def subst(term: Term, x: str, replacement: Term) -> Term:
    """Capture-avoiding term[replacement/x]."""
    fv = free_vars(replacement)
    return _subst(term, x, replacement, fv)


def _subst(term: Term, x: str, n: Term, fv: FrozenSet[str]) -> Term:
    if isinstance(term, Var):
        return n if term.name == x else term
    if isinstance(term, (Num, Dice, DiceLab)):
        return term
    if isinstance(term, Abs):
        if term.x == x:
            return term
        if term.x in fv and x in free_vars(term.body):
            y = fresh_name(term.x, fv | _all_names(term.body) | {x})
            body = _subst(term.body, term.x, Var(y), frozenset((y,)))
            return Abs(y, term.ty, _subst(body, x, n, fv))
        return Abs(term.x, term.ty, _subst(term.body, x, n, fv))
    if isinstance(term, Let):
        bound = _subst(term.bound, x, n, fv)
        if term.x == x:
            return Let(term.x, bound, term.body)
        if term.x in fv and x in free_vars(term.body):
            y = fresh_name(term.x, fv | _all_names(term.body) | {x})
            body = _subst(term.body, term.x, Var(y), frozenset((y,)))
            return Let(y, bound, _subst(body, x, n, fv))
        return Let(term.x, bound, _subst(term.body, x, n, fv))
    return map_children(term, lambda c: _subst(c, x, n, fv))


def apply_args(head: Term, args: Iterable[Term]) -> Term:
    out = head
    for a in args:
        out = App(out, a)
    return out


# ---------- labels and language variants ----------

def labels(term: Term) -> FrozenSet[Label]:
    """Labels occurring in marks and labeled coins."""
    out: set[Label] = set()
    for t in subterms(term):
        if isinstance(t, Mark):
            out.add(t.label)
        elif isinstance(t, DiceLab):
            out.add(t.label)
    return frozenset(out)


def is_core(term: Term) -> bool:
    return not any(isinstance(t, (Mark, DiceLab)) for t in subterms(term))


def is_lab(term: Term) -> bool:
    return not any(isinstance(t, DiceLab) for t in subterms(term))


def is_lc(term: Term) -> bool:
    return not any(isinstance(t, Mark) for t in subterms(term))
