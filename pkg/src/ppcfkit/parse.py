# src/ppcfkit/parse.py
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Final, List, Optional, Tuple

from .ast import (
    Abs, App, Arrow, Dice, DiceLab, Fix, If, Label, Let, Mark, Nat, NAT, Num, Pred,
    Succ, Term, Ty, Var,
)
from .errors import ParseError

__all__ = [
    "parse", "parse_type", "pretty", "pretty_type", "format_rat",
    "parse_rat", "parse_tape", "parse_multitape",
]


# ----- Tokens -----------------------------------------------------------------

_TOKEN_RE: Final = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<arrow>->)
  | (?P<fat>=>)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[()\[\]{}:=/\#])
    """,
    re.VERBOSE,
)

_KEYWORDS: Final = frozenset(
    {"fun", "succ", "pred", "coin", "ifz", "then", "else", "let", "in", "fix", "nat"}
)


@dataclass(frozen=True)
class _Tok:
    kind: str      # "kw", "ident", "number", "sym", "eof"
    text: str
    line: int
    col: int


def _tokenize(source: str) -> List[_Tok]:
    toks: List[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup or ""
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            toks.append(_Tok("kw" if text in _KEYWORDS else "ident", text, line, col))
        elif kind in ("arrow", "fat", "sym"):
            toks.append(_Tok("sym", text, line, col))
        elif kind == "number":
            toks.append(_Tok("number", text, line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# ----- Parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, source: str) -> None:
        self.toks = _tokenize(source)
        self.i = 0

    # token helpers
    def peek(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("kw", "sym") and t.text == text

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if not self.at(text):
            self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return self.advance()

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            self.fail(f"expected identifier, found {t.text or 'end of input'!r}", t)
        return self.advance().text

    @staticmethod
    def fail(message: str, tok: _Tok) -> None:
        raise ParseError(message, tok.line, tok.col)

    # grammar
    def type_(self) -> Ty:
        left = self.type_atom()
        if self.at("->"):
            self.advance()
            return Arrow(left, self.type_())
        return left

    def type_atom(self) -> Ty:
        if self.at("nat"):
            self.advance()
            return NAT
        if self.at("("):
            self.advance()
            ty = self.type_()
            self.expect(")")
            return ty
        t = self.peek()
        self.fail(f"expected a type, found {t.text or 'end of input'!r}", t)
        raise AssertionError  # unreachable

    def term(self) -> Term:
        if self.at("fun"):
            self.advance()
            x = self.ident()
            self.expect(":")
            ty = self.type_()
            self.expect("=>")
            return Abs(x, ty, self.term())
        return self.app()

    def _starts_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("number", "ident"):
            return True
        if t.kind == "kw":
            return t.text in ("succ", "pred", "coin", "ifz", "let", "fix")
        return t.kind == "sym" and t.text in ("(", "#")

    def app(self) -> Term:
        head = self.atom()
        while self._starts_atom():
            head = App(head, self.atom())
        return head

    def atom(self) -> Term:
        t = self.peek()
        if t.kind == "number":
            if "." in t.text:
                self.fail("numeral must be a natural number", t)
            self.advance()
            return Num(int(t.text))
        if t.kind == "ident":
            self.advance()
            return Var(t.text)
        if self.at("("):
            self.advance()
            inner = self.term()
            self.expect(")")
            return inner
        if self.at("succ"):
            self.advance()
            return Succ(self.atom())
        if self.at("pred"):
            self.advance()
            return Pred(self.atom())
        if self.at("fix"):
            self.advance()
            return Fix(self.atom())
        if self.at("coin"):
            self.advance()
            label: Optional[Label] = None
            if self.at("["):
                self.advance()
                label = Label(self.ident())
                self.expect("]")
            self.expect("(")
            r = self.rat()
            self.expect(")")
            return Dice(r) if label is None else DiceLab(label, r)
        if self.at("ifz"):
            self.advance()
            scrut = self.term()
            self.expect("then")
            zero = self.term()
            self.expect("else")
            return If(scrut, zero, self.term())
        if self.at("let"):
            self.advance()
            x = self.ident()
            self.expect("=")
            bound = self.term()
            self.expect("in")
            return Let(x, bound, self.term())
        if self.at("#"):
            self.advance()
            label = Label(self.ident())
            self.expect("{")
            inner = self.term()
            self.expect("}")
            return Mark(inner, label)
        self.fail(f"unexpected {t.text or 'end of input'!r}", t)
        raise AssertionError  # unreachable

    def rat(self) -> Fraction:
        t = self.peek()
        if t.kind != "number":
            self.fail("expected a probability literal", t)
        self.advance()
        value = Fraction(t.text)
        if self.at("/"):
            self.advance()
            d = self.peek()
            if d.kind != "number" or "." in d.text or "." in t.text:
                self.fail("expected integer / integer", d)
            self.advance()
            if int(d.text) == 0:
                self.fail("zero denominator", d)
            value = Fraction(int(t.text), int(d.text))
        if not (0 <= value <= 1):
            self.fail(f"probability {format_rat(value)} out of range [0,1]", t)
        return value

    def done(self) -> None:
        t = self.peek()
        if t.kind != "eof":
            self.fail(f"trailing input {t.text!r}", t)


def parse(source: str) -> Term:
    p = _Parser(source)
    term = p.term()
    p.done()
    return term


def parse_type(source: str) -> Ty:
    p = _Parser(source)
    ty = p.type_()
    p.done()
    return ty


def parse_rat(text: str) -> Fraction:
    """Probability literal as accepted inside coin(...)."""
    p = _Parser(text)
    r = p.rat()
    p.done()
    return r


# ----- Tapes ------------------------------------------------------------------

_BITS_RE: Final = re.compile(r"^[01]*$")


def parse_tape(text: str) -> Tuple[int, ...]:
    s = text.strip()
    if not _BITS_RE.match(s):
        raise ParseError(f"tape must be a string over {{0,1}}: {text!r}", 1, 1)
    return tuple(int(c) for c in s)


def parse_multitape(text: str) -> Dict[Label, Tuple[int, ...]]:
    """'l:010,m:' -> {l: (0,1,0), m: ()}"""
    out: Dict[Label, Tuple[int, ...]] = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, sep, bits = part.partition(":")
        if not sep or not name.strip():
            raise ParseError(f"expected label:bits, got {part!r}", 1, 1)
        out[Label(name.strip())] = parse_tape(bits)
    return out


# ----- Pretty printing -------------------------------------------------------

def format_rat(r: Fraction) -> str:
    return str(r.numerator) if r.denominator == 1 else f"{r.numerator}/{r.denominator}"


def pretty_type(ty: Ty) -> str:
    if isinstance(ty, Nat):
        return "nat"
    dom = pretty_type(ty.dom)
    if isinstance(ty.dom, Arrow):
        dom = f"({dom})"
    return f"{dom} -> {pretty_type(ty.cod)}"


def pretty(term: Term) -> str:
    return _pp(term, "term")


def _pp(t: Term, where: str) -> str:
    # where: "term" (anything goes), "head" (left of an application), "atom"
    if isinstance(t, Num):
        return str(t.n)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Dice):
        return f"coin({format_rat(t.r)})"
    if isinstance(t, DiceLab):
        return f"coin[{t.label.name}]({format_rat(t.r)})"
    if isinstance(t, Mark):
        return f"#{t.label.name}{{{_pp(t.t, 'term')}}}"
    if isinstance(t, (Succ, Pred, Fix)):
        kw = {Succ: "succ", Pred: "pred", Fix: "fix"}[type(t)]
        s = f"{kw} {_pp(t.t, 'atom')}"
        return s if where != "atom" else f"({s})"
    if isinstance(t, App):
        s = f"{_pp(t.fn, 'head')} {_pp(t.arg, 'atom')}"
        return s if where != "atom" else f"({s})"
    if isinstance(t, If):
        s = f"ifz {_pp(t.scrut, 'term')} then {_pp(t.zero, 'term')} else {_pp(t.nonzero, 'term')}"
    elif isinstance(t, Let):
        s = f"let {t.x} = {_pp(t.bound, 'term')} in {_pp(t.body, 'term')}"
    elif isinstance(t, Abs):
        s = f"fun {t.x}: {pretty_type(t.ty)} => {_pp(t.body, 'term')}"
    else:
        raise TypeError(f"not a term: {t!r}")
    # these forms extend as far right as possible
    return s if where == "term" else f"({s})"
