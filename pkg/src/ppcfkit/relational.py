# src/ppcfkit/relational.py
"""Relational points of terms as judgments of an intersection type system.

A point of nat is a numeral; a point of s -> t is (mu, b) with mu a finite
multiset of points of s. A judgment Phi |- M : a gives one multiset per
context variable. Judgments are computed bottom-up within SearchBounds and
every one keeps the premises it was first derived from, so it can be
replayed against the rules.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .ast import (
    Abs, App, Dice, DiceLab, Fix, If, Label, Let, Mark, NAT, Nat, Num, Pred, Succ, Term,
    Ty, TyCtx, Var, is_closed, subterms,
)
from .errors import PreconditionError, TypeCheckError
from .explore import enumerate as enumerate_tapes
from .log import warn
from .machine import LabelMultiset, State
from .parse import pretty, pretty_type
from .transform import spy, spy_context, spy_vars
from .typecheck import check_type, typecheck

__all__ = [
    "Point", "Multiset", "SemCtx", "SearchBounds", "Judgment", "InferResult",
    "infer_points", "replay", "support_match", "SupportReport",
    "clique_check", "CliqueReport", "format_point", "format_judgment",
]

Point = Union[int, Tuple["Multiset", "Point"]]
Multiset = Tuple[Point, ...]   # sorted
SemCtx = Tuple[Multiset, ...]  # aligned with the TyCtx entries


@dataclass(frozen=True)
class SearchBounds:
    max_multiset_size: int = 3
    max_numeral: int = 6
    max_depth: int = 8
    max_context_size: int = 6
    max_web: int = 2000

    def __post_init__(self) -> None:
        if min(self.max_multiset_size, self.max_numeral, self.max_depth,
               self.max_context_size, self.max_web) < 0:
            raise PreconditionError("search bounds must be >= 0")


@dataclass(frozen=True)
class Judgment:
    term: Term
    ctx: TyCtx
    phi: SemCtx
    point: Point


# ---------- multisets and contexts ----------

def _mset(items: Iterable[Point]) -> Multiset:
    return tuple(sorted(items, key=_point_key))


def _point_key(a: Point):
    # ints before pairs; pairs compare structurally
    if isinstance(a, int):
        return (0, a)
    mu, b = a
    return (1, tuple(_point_key(x) for x in mu), _point_key(b))


def _zero(ctx: TyCtx) -> SemCtx:
    return tuple(() for _ in range(len(ctx)))


def _plus(*phis: SemCtx) -> SemCtx:
    if len(phis) == 1:
        return phis[0]
    return tuple(_mset(itertools.chain.from_iterable(ms)) for ms in zip(*phis))


def _drop_bound(inner: TyCtx, phi: SemCtx, outer: TyCtx, x: str) -> Tuple[Multiset, SemCtx]:
    """Split a context of inner = outer.extend(x, _) into x's multiset and the rest."""
    by_name = dict(zip(inner.names(), phi))
    rest = tuple(() if name == x else by_name[name] for name in outer.names())
    return by_name[x], rest


def _point_fits(a: Point, b: SearchBounds) -> bool:
    if isinstance(a, int):
        return a <= b.max_numeral
    mu, c = a
    return len(mu) <= b.max_multiset_size and all(_point_fits(x, b) for x in mu) and _point_fits(c, b)


# ---------- search ----------

_Premise = Tuple[Term, TyCtx, SemCtx, Point]
_Table = Dict[Tuple[SemCtx, Point], None]


class _Search:
    def __init__(self, bounds: SearchBounds) -> None:
        self.b = bounds
        self.memo: Dict[Tuple[Term, TyCtx], _Table] = {}
        self.witness: Dict[Tuple[Term, TyCtx, SemCtx, Point], Tuple[str, Tuple[_Premise, ...]]] = {}
        self.webs: Dict[Ty, List[Point]] = {}
        self.truncated = False

    def web(self, ty: Ty) -> List[Point]:
        got = self.webs.get(ty)
        if got is not None:
            return got
        if isinstance(ty, Nat):
            out: List[Point] = list(range(self.b.max_numeral + 1))
        else:
            dom, cod = self.web(ty.dom), self.web(ty.cod)
            out = []
            for k in range(self.b.max_multiset_size + 1):
                for mu in itertools.combinations_with_replacement(dom, k):
                    for c in cod:
                        out.append((_mset(mu), c))
                        if len(out) >= self.b.max_web:
                            self.truncated = True
                            self.webs[ty] = out
                            return out
        self.webs[ty] = out
        return out

    def add(self, out: _Table, term: Term, ctx: TyCtx, phi: SemCtx, a: Point,
            rule: str, premises: Tuple[_Premise, ...]) -> None:
        if not _point_fits(a, self.b) or any(len(m) > self.b.max_context_size for m in phi):
            self.truncated = True
            return
        if (phi, a) not in out:
            out[(phi, a)] = None
        self.witness.setdefault((term, ctx, phi, a), (rule, premises))

    def pts(self, term: Term, ctx: TyCtx) -> _Table:
        key = (term, ctx)
        got = self.memo.get(key)
        if got is None:
            got = self.memo[key] = self._pts(term, ctx)
        return got

    def by_point(self, term: Term, ctx: TyCtx) -> Dict[Point, List[SemCtx]]:
        idx: Dict[Point, List[SemCtx]] = {}
        for phi, a in self.pts(term, ctx):
            idx.setdefault(a, []).append(phi)
        return idx

    def _pts(self, term: Term, ctx: TyCtx) -> _Table:
        out: _Table = {}
        z = _zero(ctx)
        if isinstance(term, Num):
            self.add(out, term, ctx, z, term.n, "num", ())
        elif isinstance(term, Var):
            names = ctx.names()
            i = names.index(term.name)
            ty = ctx.lookup(term.name)
            for a in self.web(ty):
                phi = tuple((a,) if j == i else () for j in range(len(names)))
                self.add(out, term, ctx, phi, a, "var", ())
        elif isinstance(term, (Dice, DiceLab)):
            if term.r > 0:
                self.add(out, term, ctx, z, 0, "dice0", ())
            if term.r < 1:
                self.add(out, term, ctx, z, 1, "dice1", ())
        elif isinstance(term, Mark):
            for phi, a in list(self.pts(term.t, ctx)):
                self.add(out, term, ctx, phi, a, "mark", ((term.t, ctx, phi, a),))
        elif isinstance(term, Succ):
            for phi, n in list(self.pts(term.t, ctx)):
                self.add(out, term, ctx, phi, n + 1, "succ", ((term.t, ctx, phi, n),))
        elif isinstance(term, Pred):
            for phi, n in list(self.pts(term.t, ctx)):
                self.add(out, term, ctx, phi, max(n - 1, 0), "pred", ((term.t, ctx, phi, n),))
        elif isinstance(term, If):
            for phi, n in list(self.pts(term.scrut, ctx)):
                branch = term.zero if n == 0 else term.nonzero
                for psi, a in list(self.pts(branch, ctx)):
                    self.add(out, term, ctx, _plus(phi, psi), a, "if0" if n == 0 else "if1",
                             ((term.scrut, ctx, phi, n), (branch, ctx, psi, a)))
        elif isinstance(term, Let):
            inner = ctx.extend(term.x, NAT)
            body = list(self.pts(term.body, inner))
            for phi, n in list(self.pts(term.bound, ctx)):
                for psi, a in body:
                    mu, rest = _drop_bound(inner, psi, ctx, term.x)
                    if all(m == n for m in mu):
                        self.add(out, term, ctx, _plus(phi, rest), a, "let",
                                 ((term.bound, ctx, phi, n), (term.body, inner, psi, a)))
        elif isinstance(term, Abs):
            inner = ctx.extend(term.x, term.ty)
            for psi, b in list(self.pts(term.body, inner)):
                mu, rest = _drop_bound(inner, psi, ctx, term.x)
                self.add(out, term, ctx, rest, (mu, b), "abs", ((term.body, inner, psi, b),))
        elif isinstance(term, App):
            args = self.by_point(term.arg, ctx)
            for phi, (mu, b) in list(self.pts(term.fn, ctx)):
                self._apply(out, term, ctx, "app", (term.fn, ctx, phi, (mu, b)), term.arg, args)
        elif isinstance(term, Fix):
            self._fix(out, term, ctx)
        else:
            raise TypeCheckError(f"not a term: {term!r}", term=term)
        return out

    def _apply(self, out: _Table, term: Term, ctx: TyCtx, rule: str, head: _Premise,
               arg: Term, args: Dict[Point, List[SemCtx]]) -> None:
        # head point ([a1..ak], b): one argument judgment per a_i
        _, _, phi, (mu, b) = head
        choices = [args.get(a, []) for a in mu]
        if any(not c for c in choices):
            return
        for picked in itertools.product(*choices):
            prem = tuple((arg, ctx, psi, a) for psi, a in zip(picked, mu))
            self.add(out, term, ctx, _plus(phi, *picked) if picked else phi, b, rule, (head,) + prem)

    def _fix(self, out: _Table, term: Fix, ctx: TyCtx) -> None:
        body = list(self.pts(term.t, ctx))
        for _ in range(self.b.max_depth):
            before = len(out)
            known: Dict[Point, List[SemCtx]] = {}
            for phi, a in out:
                known.setdefault(a, []).append(phi)
            for phi, (mu, b) in body:
                self._apply(out, term, ctx, "fix", (term.t, ctx, phi, (mu, b)), term, known)
            if len(out) == before:
                return
        self.truncated = True


@dataclass
class InferResult:
    judgments: List[Judgment]
    truncated: bool
    _search: _Search = field(repr=False, compare=False)

    def points(self) -> List[Point]:
        return [j.point for j in self.judgments]


def infer_points(
    ctx: TyCtx, term: Term, goal_ty: Ty, bounds: SearchBounds = SearchBounds()
) -> InferResult:
    """All judgments Phi |- term : a at goal_ty within bounds."""
    ty = typecheck(ctx, term)
    if ty != goal_ty:
        raise TypeCheckError(
            f"{pretty(term)} has type {pretty_type(ty)}, not {pretty_type(goal_ty)}",
            term=term, expected=goal_ty, actual=ty,
        )
    s = _Search(bounds)
    table = s.pts(term, ctx)
    js = [Judgment(term, ctx, phi, a) for phi, a in table]
    js.sort(key=format_judgment)
    if s.truncated:
        warn("⚠ relational search truncated by its bounds")
    return InferResult(js, s.truncated, s)


# ---------- replay ----------

def replay(result: InferResult, j: Judgment) -> bool:
    """Re-check the stored derivation of j rule by rule, down to the leaves."""
    return _replay(result._search, (j.term, j.ctx, j.phi, j.point), set())


def _replay(s: _Search, j: _Premise, active: set) -> bool:
    if j in active:
        return False
    w = s.witness.get(j)
    if w is None:
        return False
    rule, prem = w
    if not _rule_ok(rule, j, prem):
        return False
    active.add(j)
    ok = all(_replay(s, p, active) for p in prem)
    active.discard(j)
    return ok


def _rule_ok(rule: str, j: _Premise, prem: Tuple[_Premise, ...]) -> bool:
    term, ctx, phi, a = j
    z = _zero(ctx)
    if rule == "num":
        return isinstance(term, Num) and phi == z and a == term.n
    if rule == "var":
        names = ctx.names()
        return isinstance(term, Var) and phi == tuple(
            (a,) if n == term.name else () for n in names
        )
    if rule in ("dice0", "dice1"):
        if not isinstance(term, (Dice, DiceLab)) or phi != z:
            return False
        return (a == 0 and term.r > 0) if rule == "dice0" else (a == 1 and term.r < 1)
    if rule == "mark":
        (t, c, p, b), = prem
        return isinstance(term, Mark) and t == term.t and c == ctx and p == phi and b == a
    if rule in ("succ", "pred"):
        (t, c, p, n), = prem
        want = n + 1 if rule == "succ" else max(n - 1, 0)
        return t == term.t and c == ctx and p == phi and a == want
    if rule in ("if0", "if1"):
        (s0, c0, p0, n), (br, c1, p1, b) = prem
        if not isinstance(term, If) or s0 != term.scrut or c0 != ctx or c1 != ctx or b != a:
            return False
        if (n == 0) != (rule == "if0"):
            return False
        taken, other = (term.zero, term.nonzero) if n == 0 else (term.nonzero, term.zero)
        return br == taken and check_type(other, ctx) is not None and phi == _plus(p0, p1)
    if rule == "let":
        (m, c0, p0, n), (body, inner, p1, b) = prem
        if not isinstance(term, Let) or m != term.bound or body != term.body or b != a:
            return False
        if inner != ctx.extend(term.x, NAT) or c0 != ctx:
            return False
        mu, rest = _drop_bound(inner, p1, ctx, term.x)
        return all(x == n for x in mu) and phi == _plus(p0, rest)
    if rule == "abs":
        (body, inner, p1, b), = prem
        if not isinstance(term, Abs) or body != term.body or inner != ctx.extend(term.x, term.ty):
            return False
        mu, rest = _drop_bound(inner, p1, ctx, term.x)
        return rest == phi and a == (mu, b)
    if rule in ("app", "fix"):
        (h, ch, ph, hp), *args = prem
        if rule == "app":
            if not isinstance(term, App) or h != term.fn:
                return False
            arg = term.arg
        else:
            if not isinstance(term, Fix) or h != term.t:
                return False
            arg = term
        if ch != ctx or isinstance(hp, int):
            return False
        mu, b = hp
        if b != a or len(args) != len(mu):
            return False
        if any(t != arg or c != ctx or x != m for (t, c, _, x), m in zip(args, mu)):
            return False
        return phi == _plus(ph, *(p for _, _, p, _ in args)) if args else phi == ph
    return False


# ---------- checks against the machine ----------

@dataclass
class SupportReport:
    relational: frozenset
    operational: frozenset
    truncated: bool
    complete: bool = True

    @property
    def conclusive(self) -> bool:
        """False when both sides are partial, so neither inclusion can fail."""
        return not self.truncated or self.complete

    @property
    def ok(self) -> bool:
        # a truncated search misses points; a residual leaves the machine side a lower bound
        if self.truncated and self.complete:
            return self.relational <= self.operational
        if self.complete:
            return self.relational == self.operational
        if not self.truncated:
            return self.operational <= self.relational
        return True


def support_match(
    term: Term, bounds: SearchBounds = SearchBounds(), fuel: int = 10000, max_tape: int = 64
) -> SupportReport:
    """Closed numerals with a derivation versus numerals reached with positive probability."""
    if not is_closed(term) or typecheck(TyCtx(), term) != NAT:
        raise PreconditionError("support_match needs a closed term of type nat")
    for t in subterms(term):
        if isinstance(t, (Dice, DiceLab)) and t.r in (0, 1):
            raise PreconditionError("support_match needs coin probabilities strictly inside (0,1)")
    res = enumerate_tapes(State.initial(term), fuel, max_tape)
    if res.residual != 0:
        warn(f"enumeration leaves residual {res.residual}; comparing reached numerals only")
    rel = infer_points(TyCtx(), term, NAT, bounds)
    got = frozenset(j.point for j in rel.judgments)
    op = res.support()
    if rel.truncated:
        # compare only what the bounds can see
        op = frozenset(n for n in op if n <= bounds.max_numeral)
    return SupportReport(got, op, rel.truncated, res.residual == 0)


@dataclass
class CliqueReport:
    judgments: List[Judgment]
    vars: Dict[Label, str]
    machine: Optional[Tuple[int, LabelMultiset]]
    truncated: bool

    @property
    def size(self) -> int:
        return len(self.judgments)

    def counts(self) -> Optional[Dict[Label, int]]:
        if not self.judgments:
            return None
        j = self.judgments[0]
        by_name = dict(zip(j.ctx.names(), j.phi))
        return {l: len(by_name[x]) for l, x in self.vars.items()}

    def value(self) -> Optional[int]:
        return self.judgments[0].point if self.judgments else None  # type: ignore[return-value]

    @property
    def matches(self) -> bool:
        """One point and the machine run agree, or neither exists."""
        if self.machine is None:
            return not self.judgments
        if self.size != 1:
            return False
        n, mu = self.machine
        counts = self.counts() or {}
        return self.value() == n and all(counts[l] == mu.count(l) for l in self.vars)


def clique_check(
    term: Term, bounds: SearchBounds = SearchBounds(), fuel: int = 10000
) -> CliqueReport:
    """Points of spy(term) whose label variables only carry 0, next to the machine run of term.

    term is a closed deterministic labeled term of type nat: marks allowed,
    coins not.
    """
    if any(isinstance(t, (Dice, DiceLab)) for t in subterms(term)):
        raise PreconditionError("clique_check needs a deterministic term (no coins)")
    if not is_closed(term) or typecheck(TyCtx(), term) != NAT:
        raise PreconditionError("clique_check needs a closed term of type nat")
    vs = spy_vars(term)
    spied = spy(term, vs)
    ctx = spy_context(vs)
    rel = infer_points(ctx, spied, NAT, bounds)
    zero_only = [j for j in rel.judgments if all(x == 0 for m in j.phi for x in m)]
    res = enumerate_tapes(State.initial(term), fuel, 0)
    machine = next(iter(res.outcomes), None)
    return CliqueReport(zero_only, vs, machine, rel.truncated)


# ---------- formatting ----------

def format_point(a: Point) -> str:
    if isinstance(a, int):
        return str(a)
    mu, b = a
    return "([" + ",".join(format_point(x) for x in mu) + "], " + format_point(b) + ")"


def format_judgment(j: Judgment) -> str:
    phi = ", ".join(
        f"{x}:[{','.join(format_point(p) for p in m)}]" for x, m in zip(j.ctx.names(), j.phi)
    )
    left = f"{phi} " if phi else ""
    return f"{left}⊢ {pretty(j.term)} : {format_point(j.point)}"
