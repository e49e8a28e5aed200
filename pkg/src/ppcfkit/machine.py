# src/ppcfkit/machine.py
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Final, Iterable, Mapping, Optional, Protocol, Tuple, Union

from .ast import (
    Abs, App, Arg, Dice, DiceLab, Empty, EMPTY, Fix, If, IfF, Label, Let, LetF, Mark, Num,
    Pred, PredF, Stack, Succ, SuccF, Term, Var, is_lab, is_lc, labels, stack_frames, subst,
)
from .errors import PreconditionError
from .typecheck import type_of_state

__all__ = [
    "Tape", "MultiTape", "State", "LabelMultiset",
    "AcceptZero", "Reject", "OutOfFuel", "RunOutcome",
    "TERMINAL_NONZERO", "LEFTOVER_TAPE", "TAPE_EXHAUSTED", "EMPTY_LABEL_TAPE", "STUCK",
    "pneg", "step", "drive", "run_tape", "run_lc", "run_lc_shuffle",
    "state_labels", "state_is", "frame_terms", "format_tape", "NO_LABELS", "TapeReader",
]

Tape = Tuple[int, ...]
MultiTape = Mapping[Label, Tape]

TERMINAL_NONZERO: Final = "terminal-nonzero"
LEFTOVER_TAPE: Final = "leftover-tape"
TAPE_EXHAUSTED: Final = "tape-exhausted"
EMPTY_LABEL_TAPE: Final = "empty-label-tape"
STUCK: Final = "stuck"


def format_tape(tape: Iterable[int]) -> str:
    return "".join(str(b) for b in tape)


# ---------- states ----------

@dataclass(frozen=True)
class State:
    """A closed machine state <term, stack>; typed on construction."""
    term: Term
    stack: Stack = EMPTY

    def __post_init__(self) -> None:
        type_of_state(self.term, self.stack)

    @classmethod
    def initial(cls, term: Term) -> "State":
        return cls(term, EMPTY)


def state_labels(state: State) -> frozenset[Label]:
    out = set(labels(state.term))
    for fr in stack_frames(state.stack):
        for t in frame_terms(fr):
            out |= labels(t)
    return frozenset(out)


def frame_terms(frame: Stack) -> Tuple[Term, ...]:
    if isinstance(frame, Arg):
        return (frame.m,)
    if isinstance(frame, IfF):
        return (frame.zero, frame.nonzero)
    if isinstance(frame, LetF):
        return (frame.body,)
    return ()


def state_is(state: State, pred) -> bool:
    """Apply a variant predicate (is_core, is_lab, is_lc) to the term and every frame."""
    return pred(state.term) and all(
        pred(t) for fr in stack_frames(state.stack) for t in frame_terms(fr)
    )


# ---------- label multisets ----------

@dataclass(frozen=True, order=True)
class LabelMultiset:
    items: Tuple[Tuple[Label, int], ...] = ()

    @classmethod
    def of(cls, *ls: Label) -> "LabelMultiset":
        counts: Dict[Label, int] = {}
        for l in ls:
            counts[l] = counts.get(l, 0) + 1
        return cls.from_counts(counts)

    @classmethod
    def from_counts(cls, counts: Mapping[Label, int]) -> "LabelMultiset":
        if any(c < 0 for c in counts.values()):
            raise ValueError("label counts must be >= 0")
        return cls(tuple(sorted((l, c) for l, c in counts.items() if c > 0)))

    def count(self, l: Label) -> int:
        for k, c in self.items:
            if k == l:
                return c
        return 0

    def add(self, l: Label, k: int = 1) -> "LabelMultiset":
        counts = dict(self.items)
        counts[l] = counts.get(l, 0) + k
        return LabelMultiset.from_counts(counts)

    def __add__(self, other: "LabelMultiset") -> "LabelMultiset":
        if not other.items:
            return self
        if not self.items:
            return other
        counts = dict(self.items)
        for l, c in other.items:
            counts[l] = counts.get(l, 0) + c
        return LabelMultiset.from_counts(counts)

    def size(self) -> int:
        return sum(c for _, c in self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{l.name}:{c}" for l, c in self.items) + "}"


NO_LABELS: Final = LabelMultiset()


# ---------- outcomes ----------

@dataclass(frozen=True)
class AcceptZero:
    """The run reached 0 on an empty stack with every tape consumed.

    weight lies in [0, 1]. It is 0 only when the tape forces a coin of bias 0
    or 1 onto its impossible side; enumerate skips such branches, the domain
    enumerators keep them so domains line up across strip and lcof.
    """
    weight: Fraction
    labels: LabelMultiset = NO_LABELS
    steps: int = 0


@dataclass(frozen=True)
class Reject:
    reason: str
    steps: int = 0


@dataclass(frozen=True)
class OutOfFuel:
    steps: int = 0


RunOutcome = Union[AcceptZero, Reject, OutOfFuel]


def pneg(bit: int, r: Fraction) -> Fraction:
    return r if bit == 0 else 1 - r


# ---------- one transition ----------
#
# step returns one of
#   ("next", term, stack, label | None)   label is set when a mark was passed
#   ("coin", r, label | None, stack)      caller supplies bit i and continues at <i, stack>
#   ("halt", n)                           <n, empty>
#   ("stuck",)

def step(term: Term, stack: Stack):
    if isinstance(term, Num):
        if isinstance(stack, Empty):
            return ("halt", term.n)
        if isinstance(stack, SuccF):
            return ("next", Num(term.n + 1), stack.rest, None)
        if isinstance(stack, PredF):
            return ("next", Num(max(term.n - 1, 0)), stack.rest, None)
        if isinstance(stack, IfF):
            return ("next", stack.zero if term.n == 0 else stack.nonzero, stack.rest, None)
        if isinstance(stack, LetF):
            return ("next", subst(stack.body, stack.x, term), stack.rest, None)
        return ("stuck",)
    if isinstance(term, Succ):
        return ("next", term.t, SuccF(stack), None)
    if isinstance(term, Pred):
        return ("next", term.t, PredF(stack), None)
    if isinstance(term, If):
        return ("next", term.scrut, IfF(term.zero, term.nonzero, stack), None)
    if isinstance(term, Let):
        return ("next", term.bound, LetF(term.x, term.body, stack), None)
    if isinstance(term, App):
        return ("next", term.fn, Arg(term.arg, stack), None)
    if isinstance(term, Abs):
        if isinstance(stack, Arg):
            return ("next", subst(term.body, term.x, stack.m), stack.rest, None)
        return ("stuck",)
    if isinstance(term, Fix):
        return ("next", term.t, Arg(term, stack), None)
    if isinstance(term, Mark):
        return ("next", term.t, stack, term.label)
    if isinstance(term, Dice):
        return ("coin", term.r, None, stack)
    if isinstance(term, DiceLab):
        return ("coin", term.r, term.label, stack)
    if isinstance(term, Var):
        return ("stuck",)
    raise TypeError(f"not a term: {term!r}")


# ---------- tape readers ----------

class TapeReader(Protocol):
    def read(self, r: Fraction, label: Optional[Label]) -> Union[int, str]:
        """A bit, or the reject reason when no bit is available."""

    def leftover(self) -> bool:
        """True when some tape still has unread bits."""


@dataclass
class _FixedTapes:
    tape: Tape
    mtapes: Mapping[Label, Tape] = field(default_factory=dict)
    lc: bool = False
    pos: int = 0
    lpos: Dict[Label, int] = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def read(self, r: Fraction, label: Optional[Label]) -> Union[int, str]:
        if label is None or not self.lc:
            if self.pos >= len(self.tape):
                return TAPE_EXHAUSTED
            bit = self.tape[self.pos]
            self.pos += 1
        else:
            i = self.lpos.get(label, 0)
            tape = self.mtapes.get(label, ())
            if i >= len(tape):
                return EMPTY_LABEL_TAPE
            bit = tape[i]
            self.lpos[label] = i + 1
        self.trace.append(bit)
        return bit

    def leftover(self) -> bool:
        if self.pos < len(self.tape):
            return True
        return any(self.lpos.get(l, 0) < len(t) for l, t in self.mtapes.items())


def drive(state: State, reader: TapeReader, fuel: int) -> RunOutcome:
    """Run the machine with coin bits supplied by reader, for at most fuel transitions.

    Each bit read multiplies the weight by its probability, so a bit a coin
    can never show leaves weight 0 rather than rejecting.
    """
    if fuel < 0:
        raise PreconditionError("fuel must be >= 0")
    term, stack = state.term, state.stack
    weight = Fraction(1)
    counts: Dict[Label, int] = {}
    steps = 0
    while True:
        if steps >= fuel:
            return OutOfFuel(steps)
        tr = step(term, stack)
        kind = tr[0]
        if kind == "halt":
            if tr[1] != 0:
                return Reject(TERMINAL_NONZERO, steps)
            if reader.leftover():
                return Reject(LEFTOVER_TAPE, steps)
            return AcceptZero(weight, LabelMultiset.from_counts(counts), steps + 1)
        if kind == "stuck":
            return Reject(STUCK, steps)
        steps += 1
        if kind == "next":
            _, term, stack, lab = tr
            if lab is not None:
                counts[lab] = counts.get(lab, 0) + 1
            continue
        _, r, lab, stack = tr
        bit = reader.read(r, lab)
        if isinstance(bit, str):
            return Reject(bit, steps - 1)
        weight *= pneg(bit, r)
        term = Num(bit)


# ---------- the three replay machines ----------

def run_tape(state: State, tape: Tape, fuel: int) -> RunOutcome:
    if not state_is(state, is_lab):
        raise PreconditionError("run_tape needs a term without labeled coins")
    return drive(state, _FixedTapes(tuple(tape)), fuel)


def _lc_reader(state: State, tape: Tape, mtapes: MultiTape) -> _FixedTapes:
    if not state_is(state, is_lc):
        raise PreconditionError("run_lc needs a term without marks")
    missing = state_labels(state) - set(mtapes)
    if missing:
        raise PreconditionError(f"no label tape for {sorted(l.name for l in missing)}")
    return _FixedTapes(tuple(tape), {l: tuple(t) for l, t in mtapes.items()}, lc=True)


def run_lc(state: State, tape: Tape, mtapes: MultiTape, fuel: int) -> RunOutcome:
    return drive(state, _lc_reader(state, tape, mtapes), fuel)


def run_lc_shuffle(state: State, tape: Tape, mtapes: MultiTape, fuel: int) -> Optional[Tape]:
    """The interleaving of main and label tapes in consumption order, or None when run_lc does not accept."""
    reader = _lc_reader(state, tape, mtapes)
    out = drive(state, reader, fuel)
    if not isinstance(out, AcceptZero):
        return None
    return tuple(reader.trace)
