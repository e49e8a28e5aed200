# src/ppcfkit/explore.py
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Final, Iterator, List, Optional, Tuple

from .ast import (
    Abs, App, Arg, Dice, EMPTY, Fix, If, Label, Let, Mark, NAT, Num, Pred, Succ, Term, TyCtx,
    apply_args, is_lab, stack_frames, subst,
)
from .errors import PreconditionError
from .log import note, warn
from .machine import (
    LabelMultiset, NO_LABELS, State, Tape, pneg, state_is, state_labels, step,
)
from .typecheck import typecheck

__all__ = [
    "EnumResult", "enumerate", "enumerate_domain", "enumerate_lc_domain",
    "summarize", "expect_label_operational", "Accepted",
]

_ONE: Final = Fraction(1)
_ZERO: Final = Fraction(0)


@dataclass
class EnumResult:
    """Exact outcome masses of a state over all random tapes."""
    table: Dict[LabelMultiset, Fraction] = field(default_factory=dict)
    accept_total: Fraction = _ZERO
    residual: Fraction = _ZERO
    reject_total: Fraction = _ZERO
    terminals: Dict[int, Fraction] = field(default_factory=dict)
    # mass per (terminal numeral, label multiset), nonzero terminals included
    outcomes: Dict[Tuple[int, LabelMultiset], Fraction] = field(default_factory=dict)

    def conserved(self) -> bool:
        return (
            self.accept_total == sum(self.table.values(), _ZERO)
            and self.accept_total + self.residual + self.reject_total == 1
        )

    def count_distribution(self, l: Label) -> Dict[int, Fraction]:
        """Acceptance mass by number of uses of l."""
        out: Dict[int, Fraction] = defaultdict(Fraction)
        for mu, p in self.table.items():
            out[mu.count(l)] += p
        return dict(out)

    def label_lower(self, l: Label) -> Fraction:
        return sum((mu.count(l) * p for mu, p in self.table.items()), _ZERO)

    def support(self) -> frozenset[int]:
        return frozenset(n for n, p in self.terminals.items() if p > 0)


# ---------- path enumeration ----------

@dataclass(frozen=True)
class Accepted:
    """One accepted tape (and label tapes, for lc states)."""
    tape: Tape
    mtapes: Tuple[Tuple[Label, Tape], ...]
    weight: Fraction
    labels: LabelMultiset

    def mtape_dict(self) -> Dict[Label, Tape]:
        return dict(self.mtapes)


@dataclass(frozen=True)
class _Leaf:
    kind: str              # "accept", "reject", "residual"
    weight: Fraction
    labels: LabelMultiset
    value: Optional[int]   # terminal numeral, None when stuck or unresolved
    tape: Tape
    mtapes: Tuple[Tuple[Label, Tape], ...]


def _paths(
    state: State,
    fuel: int,
    max_tape: int,
    max_label_tape: int,
    lc: bool,
    keep_zero: bool,
    track_bits: bool,
) -> Iterator[_Leaf]:
    # worklist DFS; each item is one tape prefix
    if fuel < 0 or max_tape < 0 or max_label_tape < 0:
        raise PreconditionError("fuel and tape bounds must be >= 0")
    work: List[tuple] = [(state.term, state.stack, _ONE, NO_LABELS, (), (), 0, 0)]
    while work:
        term, stack, w, mu, bits, lbits, used, steps = work.pop()
        while True:
            if steps >= fuel:
                yield _Leaf("residual", w, mu, None, bits, lbits)
                break
            tr = step(term, stack)
            kind = tr[0]
            if kind == "halt":
                n = tr[1]
                yield _Leaf("accept" if n == 0 else "reject", w, mu, n, bits, lbits)
                break
            if kind == "stuck":
                yield _Leaf("reject", w, mu, None, bits, lbits)
                break
            steps += 1
            if kind == "next":
                _, term, stack, lab = tr
                if lab is not None:
                    mu = mu.add(lab)
                continue
            _, r, lab, stack = tr
            if lab is not None and lc:
                have = sum(1 for l, _ in lbits if l == lab) if track_bits else 0
                if have >= max_label_tape:
                    yield _Leaf("residual", w, mu, None, bits, lbits)
                    break
            else:
                if used >= max_tape:
                    yield _Leaf("residual", w, mu, None, bits, lbits)
                    break
            for bit in (1, 0):
                wb = w * pneg(bit, r)
                if wb == 0 and not keep_zero:
                    continue
                if lab is not None and lc:
                    nb, nl, nu = bits, (lbits + ((lab, bit),) if track_bits else lbits), used
                else:
                    nb, nl, nu = (bits + (bit,) if track_bits else bits), lbits, used + 1
                work.append((Num(bit), stack, wb, mu, nb, nl, nu, steps))
            break


def enumerate(state: State, fuel: int, max_tape: int) -> EnumResult:
    """Exact masses by exhaustive tape enumeration.

    Paths that run out of fuel or need more than max_tape bits go to the
    residual; zero-weight branches are skipped.
    """
    if not state_is(state, is_lab):
        raise PreconditionError("enumerate needs a term without labeled coins")
    res = EnumResult()
    table: Dict[LabelMultiset, Fraction] = defaultdict(Fraction)
    terminals: Dict[int, Fraction] = defaultdict(Fraction)
    outcomes: Dict[Tuple[int, LabelMultiset], Fraction] = defaultdict(Fraction)
    for leaf in _paths(state, fuel, max_tape, 0, lc=False, keep_zero=False, track_bits=False):
        if leaf.kind == "accept":
            table[leaf.labels] += leaf.weight
            res.accept_total += leaf.weight
        elif leaf.kind == "reject":
            res.reject_total += leaf.weight
        else:
            res.residual += leaf.weight
        if leaf.value is not None:
            terminals[leaf.value] += leaf.weight
            outcomes[(leaf.value, leaf.labels)] += leaf.weight
    res.table = dict(table)
    res.terminals = dict(terminals)
    res.outcomes = dict(outcomes)
    return res


def enumerate_domain(state: State, fuel: int, max_tape: int) -> List[Accepted]:
    """Every accepted tape of length <= max_tape, zero-weight ones included."""
    if not state_is(state, is_lab):
        raise PreconditionError("enumerate_domain needs a term without labeled coins")
    return [
        Accepted(leaf.tape, (), leaf.weight, leaf.labels)
        for leaf in _paths(state, fuel, max_tape, 0, lc=False, keep_zero=True, track_bits=True)
        if leaf.kind == "accept"
    ]


def enumerate_lc_domain(
    state: State, fuel: int, max_tape: int, max_label_tape: int
) -> List[Accepted]:
    """Accepted (main tape, label tapes) pairs of the lc machine within length bounds."""
    labs = sorted(state_labels(state))
    out: List[Accepted] = []
    for leaf in _paths(state, fuel, max_tape, max_label_tape, lc=True, keep_zero=True, track_bits=True):
        if leaf.kind != "accept":
            continue
        per: Dict[Label, List[int]] = {l: [] for l in labs}
        for l, b in leaf.mtapes:
            per[l].append(b)
        out.append(Accepted(leaf.tape, tuple((l, tuple(per[l])) for l in labs), leaf.weight, leaf.labels))
    return out


# ---------- call summaries ----------
#
# A closed nat term evaluated in front of a frame always comes back to that
# frame with a numeral on top, so its behaviour is summarised once as a
# distribution over (numeral, label multiset). Continuations after a summary
# lookup are closed nat terms again and are summarised the same way.

_STUCK: Final = -1
# masses with larger denominators are floored onto this grid, keeping lower bounds
_GRID: Final = 1 << 64
_Dist = Dict[Tuple[int, LabelMultiset], Fraction]


class _Summaries:
    def __init__(self, segment_fuel: int, prune: Fraction, max_outcomes: int) -> None:
        self.segment_fuel = segment_fuel
        self.prune = prune
        self.max_outcomes = max_outcomes
        self.table: Dict[Term, _Dist] = {}
        self.order: List[Term] = []
        self.pruned = False

    def lookup(self, term: Term) -> _Dist:
        d = self.table.get(term)
        if d is None:
            d = self.table[term] = {}
            self.order.append(term)
        return d

    def _then(self, out: _Dist, w: Fraction, mu: LabelMultiset, sub: _Dist, k) -> None:
        # k maps a returned numeral to either a numeral or a continuation term
        for (n, nu), p in list(sub.items()):
            if n == _STUCK:
                out[(_STUCK, mu + nu)] += w * p
                continue
            nxt = k(n)
            if isinstance(nxt, int):
                out[(nxt, mu + nu)] += w * p
                continue
            for (n2, nu2), p2 in list(self.lookup(nxt).items()):
                out[(n2, mu + nu + nu2)] += w * p * p2

    def segment(self, root: Term) -> _Dist:
        out: _Dist = defaultdict(Fraction)
        work: List[tuple] = [(root, EMPTY, _ONE, NO_LABELS, 0)]
        while work:
            term, stack, w, mu, steps = work.pop()
            if steps >= self.segment_fuel:
                continue
            steps += 1
            args = [fr.m for fr in stack_frames(stack)]
            if isinstance(term, Num):
                out[(term.n if not args else _STUCK, mu)] += w
            elif isinstance(term, Mark):
                work.append((term.t, stack, w, mu.add(term.label), steps))
            elif isinstance(term, App):
                work.append((term.fn, Arg(term.arg, stack), w, mu, steps))
            elif isinstance(term, Abs) and isinstance(stack, Arg):
                work.append((subst(term.body, term.x, stack.m), stack.rest, w, mu, steps))
            elif isinstance(term, Fix):
                work.append((term.t, Arg(term, stack), w, mu, steps))
            elif isinstance(term, Dice) and not args:
                for bit in (0, 1):
                    if pneg(bit, term.r):
                        out[(bit, mu)] += w * pneg(bit, term.r)
            elif isinstance(term, Succ) and not args:
                self._then(out, w, mu, self.lookup(term.t), lambda n: n + 1)
            elif isinstance(term, Pred) and not args:
                self._then(out, w, mu, self.lookup(term.t), lambda n: max(n - 1, 0))
            elif isinstance(term, If):
                z, nz = apply_args(term.zero, args), apply_args(term.nonzero, args)
                self._then(out, w, mu, self.lookup(term.scrut), lambda n: z if n == 0 else nz)
            elif isinstance(term, Let):
                body, x = term.body, term.x
                self._then(out, w, mu, self.lookup(term.bound), lambda n: apply_args(subst(body, x, Num(n)), args))
            else:
                out[(_STUCK, mu)] += w
        for k, p in out.items():
            if p.denominator > _GRID:
                out[k] = Fraction(p.numerator * _GRID // p.denominator, _GRID)
        if self.prune > 0:
            small = [k for k, p in out.items() if p < self.prune]
            if small:
                self.pruned = True
                for k in small:
                    del out[k]
        if len(out) > self.max_outcomes:
            # keep the heaviest outcomes; the rest joins the residual
            self.pruned = True
            kept = sorted(out.items(), key=lambda kv: kv[1], reverse=True)[: self.max_outcomes]
            return dict(kept)
        return dict(out)


def _moved(old: _Dist, new: _Dist) -> float:
    return float(sum((abs(new.get(k, _ZERO) - old.get(k, _ZERO)) for k in set(old) | set(new)), _ZERO))


# rounds watched before judging the convergence rate, and the window it is measured over
_STALL_AFTER: Final = 20
_STALL_WINDOW: Final = 5


def _stalled(history: List[float], rounds_left: int, tol: float) -> bool:
    """True when the observed contraction cannot reach tol within rounds_left."""
    if len(history) < _STALL_AFTER:
        return False
    now, then = history[-1], history[-1 - _STALL_WINDOW]
    if now <= tol or then <= 0.0:
        return False
    rate = (now / then) ** (1.0 / _STALL_WINDOW)
    if rate >= 1.0:
        return True
    return math.log(tol / now) / math.log(rate) > rounds_left


def summarize(
    term: Term,
    rounds: int = 200,
    prune: Fraction = Fraction(1, 10**12),
    segment_fuel: int = 10000,
    tol: float = 1e-12,
    max_outcomes: int = 256,
) -> EnumResult:
    """Outcome masses of a closed nat term by Kleene iteration over call summaries.

    Each round re-summarises every term met so far; mass that needs more
    rounds, more than segment_fuel head steps, or was pruned below prune is
    residual. A summary keeps at most max_outcomes outcomes, the heaviest
    ones. Masses are floored to multiples of 2**-64 once exact fractions
    outgrow that, so recursive programs stay cheap and every figure is a lower
    bound.

    Iteration stops early when the per-round change shrinks too slowly to
    reach tol in the remaining rounds, as it does at a critical bias.
    """
    if typecheck(TyCtx(), term) != NAT:
        raise PreconditionError("summarize needs a closed term of type nat")
    if not is_lab(term):
        raise PreconditionError("summarize needs a term without labeled coins")
    if max_outcomes < 1:
        raise PreconditionError("summarize needs max_outcomes >= 1")
    s = _Summaries(segment_fuel, Fraction(prune), max_outcomes)
    s.lookup(term)
    history: List[float] = []
    for rnd in range(rounds):
        known = len(s.order)
        moved = 0.0
        i = 0
        while i < len(s.order):
            t = s.order[i]
            new = s.segment(t)
            moved = max(moved, _moved(s.table[t], new))
            s.table[t] = new
            i += 1
        history.append(moved)
        mass = float(sum(s.table[term].values(), _ZERO))
        note(f"summaries round {rnd + 1}: {len(s.order)} terms, resolved mass {mass:.12g}")
        # settled once no summary moves and no new term turned up
        if len(s.order) == known and moved <= tol:
            break
        if len(s.order) == known and _stalled(history, rounds - rnd - 1, tol):
            warn(f"⚠ call summaries converge too slowly; stopped after {rnd + 1} rounds")
            break
    else:
        warn(f"⚠ call summaries still moving after {rounds} rounds")
    if s.pruned:
        note(f"summaries pruned outcomes below {float(s.prune):.3g} or beyond the heaviest {max_outcomes} into the residual")

    res = EnumResult()
    table: Dict[LabelMultiset, Fraction] = defaultdict(Fraction)
    terminals: Dict[int, Fraction] = defaultdict(Fraction)
    outcomes: Dict[Tuple[int, LabelMultiset], Fraction] = defaultdict(Fraction)
    for (n, mu), p in s.table[term].items():
        if n == 0:
            table[mu] += p
            res.accept_total += p
        else:
            res.reject_total += p
        if n != _STUCK:
            terminals[n] += p
            outcomes[(n, mu)] += p
    res.residual = _ONE - res.accept_total - res.reject_total
    res.table = dict(table)
    res.terminals = dict(terminals)
    res.outcomes = dict(outcomes)
    return res


def expect_label_operational(
    term: Term,
    l: Label,
    fuel: int = 10000,
    max_tape: int = 64,
    strategy: str = "paths",
    rounds: int = 200,
    prune: Fraction = Fraction(1, 10**12),
) -> Tuple[Fraction, Fraction, Fraction]:
    """(lower, accept_mass, residual) for the uses of l.

    lower is the sum of count * mass over enumerated accepting outcomes;
    lower / accept_mass is the expectation conditioned on convergence.
    """
    if not is_lab(term):
        raise PreconditionError("expect_label_operational needs a labeled term without labeled coins")
    if typecheck(TyCtx(), term) != NAT:
        raise PreconditionError("expect_label_operational needs a closed term of type nat")
    if strategy == "paths":
        res = enumerate(State.initial(term), fuel, max_tape)
    elif strategy == "summaries":
        res = summarize(term, rounds=rounds, prune=prune, segment_fuel=fuel)
    else:
        raise PreconditionError(f"unknown strategy {strategy!r}")
    return res.label_lower(l), res.accept_total, res.residual
